"""Tridiagonal matrix models for the Laguerre and Jacobi ensembles at any beta > 0.

Both families admit sparse matrix models whose eigenvalue law is exactly the
target ensemble:

* Laguerre: a lower-bidiagonal matrix ``B`` with independent chi entries;
  the spectrum of ``B B^T / 2`` follows the weight ``x^alpha1 e^(-x)`` with
  repulsion exponent beta.  The chi degrees of freedom decrease in steps of
  beta down the diagonal, which is what produces the Vandermonde factor.
* Jacobi: a symmetric tridiagonal matrix assembled from independent
  beta-distributed canonical coordinates; its spectrum lives on (0, 1) and
  follows ``x^alpha1 (1-x)^alpha2``.

The parameterizations (degrees of freedom, the global /2 rescaling that maps
``e^(-x/2)`` conventions onto ``e^(-x)``) are enforced by calibration tests
against exact finite-N moments; if a constant here were wrong, those gates
would trip for every beta.

Sampling is deterministic per (seed, streams): the sample index space is
split into ``streams`` contiguous blocks and block ``i`` is generated by an
independent generator spawned from ``SeedSequence(seed).spawn(streams)[i]``.
Results are therefore bit-for-bit reproducible and embarrassingly parallel.
"""

import dataclasses
import math
import struct
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from .algebra import AlgebraError, EvaluationError, StructuralError

__all__ = [
    "ConfigurationError",
    "MCEstimate",
    "SampleConfig",
    "empirical_connected_2pt",
    "empirical_moments",
    "mc_csv_rows",
    "read_spectrum_dump",
    "sample_ensemble",
    "sample_jacobi",
    "sample_laguerre",
    "scaled_moment_estimates",
    "write_spectrum_dump",
]


class ConfigurationError(AlgebraError):
    """A sampling configuration that no matrix model realizes."""


def _exact(x, what: str) -> Fraction:
    """Exact rational from int/Fraction/str; floats are refused."""
    if isinstance(x, float):
        raise ConfigurationError(
            f"{what} must be exact; got the float {x!r} "
            "(pass an int, Fraction, or a string like '7/2')")
    try:
        return Fraction(x)
    except (ValueError, TypeError) as exc:
        raise ConfigurationError(f"cannot read {what} from {x!r}") from exc


@dataclasses.dataclass(frozen=True)
class SampleConfig:
    """One Monte Carlo run: ensemble, size, weight, and RNG bookkeeping."""

    family: str
    size: int
    beta: Fraction
    alpha1: Fraction
    alpha2: Optional[Fraction] = None
    n_samples: int = 1000
    seed: int = 0
    streams: int = 1

    def __post_init__(self):
        object.__setattr__(self, "beta", _exact(self.beta, "beta"))
        object.__setattr__(self, "alpha1", _exact(self.alpha1, "alpha1"))
        if self.alpha2 is not None:
            object.__setattr__(self, "alpha2", _exact(self.alpha2, "alpha2"))
        if self.family not in ("laguerre", "jacobi"):
            raise ConfigurationError(
                f"no matrix model for family {self.family!r} "
                "(choose 'laguerre' or 'jacobi')")
        if self.size < 1:
            raise ConfigurationError("matrix size must be at least 1")
        if self.beta <= 0:
            raise ConfigurationError(
                f"beta must be positive (got {self.beta}); every chi "
                "degree of freedom beta*(size - i) needs beta > 0")
        if self.alpha1 <= -1:
            raise ConfigurationError(
                f"alpha1 = {self.alpha1} leaves the weight non-normalizable: "
                "the smallest chi degrees of freedom, 2*alpha1 + 2, must be "
                "positive, i.e. alpha1 > -1")
        if self.family == "jacobi":
            if self.alpha2 is None:
                raise ConfigurationError("the jacobi weight needs alpha2")
            if self.alpha2 <= -1:
                raise ConfigurationError(
                    f"alpha2 = {self.alpha2} leaves the weight "
                    "non-normalizable; alpha2 > -1 is required")
        elif self.alpha2 is not None:
            raise ConfigurationError("alpha2 is only meaningful for jacobi")
        if self.n_samples < 1:
            raise ConfigurationError("n_samples must be at least 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigurationError("seed must fit in 64 bits")
        if self.streams < 1:
            raise ConfigurationError("streams must be at least 1")

    @property
    def kappa(self) -> Fraction:
        return self.beta / 2


def _stream_counts(total: int, streams: int) -> List[int]:
    base, extra = divmod(total, streams)
    return [base + (1 if i < extra else 0) for i in range(streams)]


def _stream_rngs(cfg: SampleConfig) -> List[np.random.Generator]:
    children = np.random.SeedSequence(entropy=cfg.seed).spawn(cfg.streams)
    return [np.random.default_rng(c) for c in children]


def _chi(rng: np.random.Generator, dof: np.ndarray, count: int) -> np.ndarray:
    # chi_k = sqrt(chi2_k), chi2_k = 2 Gamma(k/2); valid for any real k > 0
    return np.sqrt(2.0 * rng.standard_gamma(dof / 2.0, size=(count, dof.size)))


def _eigenvalues(diag: np.ndarray, off: np.ndarray) -> np.ndarray:
    out = np.empty_like(diag)
    if diag.shape[1] == 1:
        return diag.copy()
    for i in range(diag.shape[0]):
        out[i] = eigvalsh_tridiagonal(diag[i], off[i], lapack_driver="stev")
    return out


def sample_laguerre(cfg: SampleConfig) -> np.ndarray:
    """Spectra of the bidiagonal Laguerre model, one row per sample.

    ``B`` is lower bidiagonal with diagonal ``chi_{2 alpha1 + 2 + beta (N-i)}``
    (i = 1..N) and subdiagonal ``chi_{beta (N-i)}`` (i = 1..N-1); the returned
    eigenvalues are those of ``B B^T / 2``, distributed with density
    proportional to  prod w(x_k) prod |x_k - x_j|^beta,  w(x) = x^alpha1 e^-x.
    """
    if cfg.family != "laguerre":
        raise ConfigurationError("sample_laguerre needs a laguerre config")
    n = cfg.size
    beta = float(cfg.beta)
    a1 = float(cfg.alpha1)
    idx = np.arange(n)
    diag_dof = 2 * a1 + 2 + beta * (n - 1 - idx)
    sub_dof = beta * (n - 1 - idx[:-1])
    blocks = []
    for rng, count in zip(_stream_rngs(cfg), _stream_counts(cfg.n_samples,
                                                            cfg.streams)):
        if count == 0:
            continue
        x = _chi(rng, diag_dof, count)
        diag = x * x
        if n > 1:
            y = _chi(rng, sub_dof, count)
            diag[:, 1:] += y * y
            off = x[:, :-1] * y
        else:
            off = np.empty((count, 0))
        blocks.append(_eigenvalues(diag / 2.0, off / 2.0))
    return np.concatenate(blocks, axis=0)


def sample_jacobi(cfg: SampleConfig) -> np.ndarray:
    """Spectra of the tridiagonal Jacobi model on (0, 1), one row per sample.

    Built from 2N-1 independent beta variables (canonical coordinates)
        p_{2i-1} ~ Beta((N-i) kappa + alpha1 + 1, (N-i) kappa + alpha2 + 1)
        p_{2i}   ~ Beta((N-i) kappa, (N-i-1) kappa + alpha1 + alpha2 + 2)
    chained through zeta_1 = p_1, zeta_k = (1 - p_{k-1}) p_k; the matrix has
    diagonal d_i = zeta_{2i-2} + zeta_{2i-1} and off-diagonal
    c_i = sqrt(zeta_{2i-1} zeta_{2i}).
    """
    if cfg.family != "jacobi":
        raise ConfigurationError("sample_jacobi needs a jacobi config")
    n = cfg.size
    kap = float(cfg.kappa)
    a1 = float(cfg.alpha1)
    a2 = float(cfg.alpha2)
    i_odd = np.arange(1, n + 1)
    odd_a = (n - i_odd) * kap + a1 + 1
    odd_b = (n - i_odd) * kap + a2 + 1
    i_even = np.arange(1, n)
    even_a = (n - i_even) * kap
    even_b = (n - i_even - 1) * kap + a1 + a2 + 2
    blocks = []
    for rng, count in zip(_stream_rngs(cfg), _stream_counts(cfg.n_samples,
                                                            cfg.streams)):
        if count == 0:
            continue
        p = np.empty((count, 2 * n - 1))
        p[:, 0::2] = rng.beta(odd_a, odd_b, size=(count, n))
        if n > 1:
            p[:, 1::2] = rng.beta(even_a, even_b, size=(count, n - 1))
        zeta = np.empty_like(p)
        zeta[:, 0] = p[:, 0]
        zeta[:, 1:] = (1.0 - p[:, :-1]) * p[:, 1:]
        diag = np.empty((count, n))
        diag[:, 0] = zeta[:, 0]
        if n > 1:
            diag[:, 1:] = zeta[:, 1:-1:2] + zeta[:, 2::2]
            off = np.sqrt(zeta[:, 0:-2:2] * zeta[:, 1:-1:2])
        else:
            off = np.empty((count, 0))
        blocks.append(_eigenvalues(diag, off))
    return np.concatenate(blocks, axis=0)


def sample_ensemble(cfg: SampleConfig) -> np.ndarray:
    return (sample_laguerre if cfg.family == "laguerre"
            else sample_jacobi)(cfg)


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class MCEstimate:
    mean: Union[float, complex]
    stderr: float
    n_samples: int
    warning: Optional[str] = None


def _estimate(values: np.ndarray, warning: Optional[str] = None) -> MCEstimate:
    n = values.shape[0]
    if n < 2:
        raise StructuralError(
            "a standard error needs at least 2 samples")
    mean = values.mean(axis=0)
    spread = values - mean
    var = (spread * spread.conj()).real.sum() / (n - 1)
    est = mean.item() if np.iscomplexobj(values) else float(mean)
    return MCEstimate(est, math.sqrt(var / n), n, warning)


def empirical_moments(batches: np.ndarray,
                      ks: Sequence[int]) -> Dict[int, MCEstimate]:
    """Mean and stderr of the power sums sum_j lambda_j^k, per k.

    Negative k requires every eigenvalue strictly positive (hard-edge
    configurations); otherwise the observable does not exist and an
    :class:`EvaluationError` is raised rather than returning NaN.
    """
    batches = np.asarray(batches, dtype=float)
    if batches.ndim != 2:
        raise StructuralError("batches must be (n_samples, size)")
    out = {}
    for k in ks:
        k = int(k)
        if k < 0 and (batches <= 0).any():
            raise EvaluationError(
                f"moment k={k} needs a spectrum bounded away from zero, "
                "but the batch contains a non-positive eigenvalue")
        out[k] = _estimate((batches ** k).sum(axis=1))
    return out


def scaled_moment_estimates(batches: np.ndarray, cfg: SampleConfig,
                            ks: Sequence[int]) -> Dict[int, MCEstimate]:
    """Estimates in the units the expansions are stated in.

    laguerre:  m~_k = N^-1 sum_j (lambda_j / (N kappa))^k
    jacobi:    m_k  = sum_j lambda_j^k  (spectrum already on (0, 1))
    """
    raw = empirical_moments(batches, ks)
    if cfg.family == "jacobi":
        return raw
    c = float(cfg.size * cfg.kappa)
    out = {}
    for k, est in raw.items():
        w = c ** (-k) / cfg.size
        out[k] = MCEstimate(est.mean * w, est.stderr * abs(w),
                            est.n_samples, est.warning)
    return out


def _segment_distance(z: complex, lo: float, hi: float) -> float:
    dx = max(lo - z.real, 0.0, z.real - hi)
    return math.hypot(dx, z.imag)


def empirical_connected_2pt(batches: np.ndarray, cfg: SampleConfig,
                            pairs: Sequence[Tuple[complex, complex]],
                            support: Optional[Tuple[float, float]] = None,
                            min_distance: float = 0.1) -> List[MCEstimate]:
    """Sample-covariance estimator of the leading connected 2-point term.

    Points are given in scaled units s; internally they are mapped onto the
    raw spectral axis (x = N kappa s for laguerre, x = s for jacobi) and the
    covariance of the resolvent traces is scaled back by kappa c_N^2, which
    is the normalization in which it converges to the order-one term of the
    connected correlator expansion.  A pair closer than ``min_distance`` to
    the limiting support gets a conditioning warning attached (the estimator
    variance blows up near the cut), not an error.
    """
    batches = np.asarray(batches, dtype=float)
    n = batches.shape[0]
    if n < 2:
        raise StructuralError("a covariance needs at least 2 samples")
    if support is None:
        support = (0.0, 4.0) if cfg.family == "laguerre" else (0.0, 1.0)
    c_n = float(cfg.size * cfg.kappa) if cfg.family == "laguerre" else 1.0
    scale = float(cfg.kappa) * c_n * c_n
    out = []
    for s1, s2 in pairs:
        s1, s2 = complex(s1), complex(s2)
        warning = None
        d = min(_segment_distance(s1, *support),
                _segment_distance(s2, *support))
        if d < min_distance:
            warning = (f"evaluation point within {d:.3g} of the support "
                       "[{:g}, {:g}]; estimator is ill-conditioned".format(
                           *support))
        t1 = (1.0 / (c_n * s1 - batches)).sum(axis=1)
        t2 = (1.0 / (c_n * s2 - batches)).sum(axis=1)
        prod = (t1 - t1.mean()) * (t2 - t2.mean())
        cov = prod.sum() / (n - 1)
        # delta-method error bar: fluctuation of the influence terms
        sd = math.sqrt(((prod - prod.mean()) *
                        (prod - prod.mean()).conj()).real.sum() / (n - 1))
        out.append(MCEstimate(scale * cov, scale * sd / math.sqrt(n),
                              n, warning))
    return out


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------

def mc_csv_rows(named: Mapping[str, MCEstimate], cfg: SampleConfig) -> list:
    rows = [("observable", "mean", "stderr", "n_samples", "seed")]
    for name, est in named.items():
        mean = est.mean
        mean_s = repr(mean) if isinstance(mean, complex) else f"{mean!r}"
        rows.append((name, mean_s, f"{est.stderr!r}",
                     str(est.n_samples), str(cfg.seed)))
    return rows


_DUMP_MAGIC = b"BLSP"
_DUMP_VERSION = 1


def _frac_fields(q: Optional[Fraction]) -> Tuple[int, int]:
    if q is None:
        return 0, 0
    return q.numerator, q.denominator


def write_spectrum_dump(path, batches: np.ndarray, cfg: SampleConfig) -> None:
    """Raw eigenvalue dump; layout documented in FORMATS.md.

    Little-endian: magic "BLSP", u32 version, u8 family (0 laguerre,
    1 jacobi), u32 N, u64 n_samples, u64 seed, u32 streams, then beta,
    alpha1, alpha2 as (i64 numerator, u64 denominator) pairs (0/0 for an
    absent alpha2), then n_samples*N float64 eigenvalues, row-major.
    """
    batches = np.asarray(batches, dtype="<f8")
    header = struct.pack(
        "<4sIBIQQI", _DUMP_MAGIC, _DUMP_VERSION,
        0 if cfg.family == "laguerre" else 1,
        cfg.size, batches.shape[0], cfg.seed, cfg.streams)
    for q in (cfg.beta, cfg.alpha1, cfg.alpha2):
        header += struct.pack("<qQ", *_frac_fields(q))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(batches.tobytes(order="C"))


def read_spectrum_dump(path) -> Tuple[np.ndarray, SampleConfig]:
    with open(path, "rb") as fh:
        blob = fh.read()
    head = struct.calcsize("<4sIBIQQI")
    magic, version, fam, size, count, seed, streams = struct.unpack(
        "<4sIBIQQI", blob[:head])
    if magic != _DUMP_MAGIC or version != _DUMP_VERSION:
        raise StructuralError("not a spectrum dump (bad magic/version)")
    qs = []
    for i in range(3):
        num, den = struct.unpack("<qQ", blob[head + 16 * i:head + 16 * (i + 1)])
        qs.append(None if den == 0 else Fraction(num, den))
    beta, alpha1, alpha2 = qs
    cfg = SampleConfig("laguerre" if fam == 0 else "jacobi", size,
                       beta, alpha1, alpha2, n_samples=count,
                       seed=seed, streams=streams)
    data = np.frombuffer(blob[head + 48:], dtype="<f8")
    if data.size != count * size:
        raise StructuralError("spectrum dump is truncated")
    return data.reshape(count, size).copy(), cfg
