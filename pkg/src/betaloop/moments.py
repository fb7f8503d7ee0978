"""Moment expansions extracted from the correlator tables.

The one-point functions ``W_1^l`` in a :class:`~betaloop.loop_solver.CorrelatorTable`
are generating functions for the 1/N expansion of the spectral moments: the
``s^{-k-1}`` tail coefficient of ``W_1^l`` is (up to a power of sqrt(kappa))
the order-``1/N^l`` piece of the k-th moment.  This module pulls those
coefficients out of the series, rewrites them as honest rational functions of
kappa and the weight parameters, and assembles :class:`MomentExpansion`
records.  It also carries the classical closed forms for the low-order
coefficients (Catalan and Narayana numbers, Gegenbauer polynomials), exact
finite-N Jacobi moments for k = 1 and k = 3, the specialization onto circular
Dyson moments, and the kappa -> 1/kappa inversion symmetries.

Conventions
-----------
* gaussian / laguerre tables expand in ``(N sqrt(kappa))^{-l}``; the moment
  coefficient is ``a_l^{(k)} = kappa^{-l/2} [s^{-k-1}] W_1^l`` and the scaled
  moments are ``m~_k = sum_l a_l^{(k)} N^{-l}``, the moments of the density on
  the fixed support.  For these families the sum terminates at ``l = k``.
* jacobi tables expand in ``(N kappa)^{-l}``; moments follow
  ``m_k = N sum_l b_l^{(k)} (N kappa)^{-l}`` with ``b_l^{(k)} = [s^{-k-1}] W_1^l``.
  The 1/N series does not terminate (exact Jacobi moments are rational, not
  polynomial, in N).
* negative moments use the small-s series instead; they are available when
  the support is bounded away from the origin (laguerre, orderN-one-sided).

Coefficients are exact sympy expressions over :data:`KAPPA`, :data:`N`,
:data:`ALPHA1`, :data:`ALPHA2`, :data:`TA1`, :data:`TA2`, :data:`DELTA1`,
:data:`DELTA2`.
"""
from __future__ import annotations

import dataclasses
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Optional, Sequence, Tuple

import numpy
import sympy
from sympy import Rational, binomial, cancel, together

from .algebra import (
    AlgebraicFn,
    CapabilityError,
    EvaluationError,
    ParamScalar,
    SeriesTruncationError,
    StructuralError,
    scalar,
)
from .loop_solver import ConsistencyError, CorrelatorTable, SchedulingError

__all__ = [
    "KAPPA", "N", "ALPHA1", "ALPHA2", "TA1", "TA2", "DELTA1", "DELTA2",
    "MomentExpansion", "ExactMoment",
    "to_parameter_expr", "expand_moments", "expand_negative_moments",
    "catalan", "narayana_moment", "a1_fixed", "a1_orderN", "negative_moment",
    "gegenbauer", "jacobi_exact_m1", "jacobi_exact_m3", "circular_M",
    "laguerre_moment_symmetry_check", "jacobi_moment_symmetry_check",
    "resolvent_kappa_inversion_check", "substituted_expansion_check",
    "denominator_zero_report", "moment_csv_rows", "exact_moment_record",
]

KAPPA, N = sympy.symbols("kappa N", positive=True)
ALPHA1, ALPHA2, TA1, TA2, DELTA1, DELTA2 = sympy.symbols(
    "alpha1 alpha2 ta1 ta2 delta1 delta2")

#: plain generator -> report symbol
_SYM_FOR = {"a1": ALPHA1, "a2": ALPHA2, "d1": DELTA1, "d2": DELTA2}
#: square-root generator -> value of its square
_EVEN_FOR = {"r": KAPPA, "g1": TA1 + 1, "g2": TA2 + 1}
_NAME_TO_SYM = {str(s): s for s in
                (KAPPA, N, ALPHA1, ALPHA2, TA1, TA2, DELTA1, DELTA2)}


# ---------------------------------------------------------------------------
# the surd -> rational bridge
# ---------------------------------------------------------------------------

def _poly_to_expr(poly, gens: tuple) -> sympy.Expr:
    """Monomial-by-monomial rewrite; square-root generators must appear with
    even exponents only (their squares are the rational parameters)."""
    terms = []
    for monom, coeff in poly.terms():
        fac = [Rational(int(coeff.numerator), int(coeff.denominator))]
        for g, e in zip(gens, monom):
            if not e:
                continue
            if g in _EVEN_FOR:
                if e % 2:
                    raise ConsistencyError(
                        f"odd power of {g} survives the even-power rewrite")
                fac.append(_EVEN_FOR[g] ** (e // 2))
            else:
                fac.append(_SYM_FOR[g] ** e)
        terms.append(sympy.Mul(*fac))
    return sympy.Add(*terms)


def to_parameter_expr(ps: ParamScalar, half_powers: int = 0) -> sympy.Expr:
    """Rewrite a parameter scalar as a rational sympy expression.

    ``half_powers`` divides by ``kappa^{half_powers/2}`` first (the series
    coefficient of ``W_1^l`` carries ``kappa^{l/2}``).  A reduced fraction of
    a function even in the square-root generators has even numerator and
    denominator separately, so the per-polynomial rewrite is exact; an odd
    exponent anywhere signals a parity violation and raises
    :class:`ConsistencyError`.
    """
    if half_powers:
        ps = ps / scalar("r") ** half_powers
    num = _poly_to_expr(ps.elem.numer, ps.gens)
    den = _poly_to_expr(ps.elem.denom, ps.gens)
    return cancel(num / den)


# ---------------------------------------------------------------------------
# expansion records
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class MomentExpansion:
    """One moment's 1/N expansion.

    ``scheme == "scaled"``:   m~_k = sum_i terms[i] * N^{-i}
    ``scheme == "unscaled"``: m_k  = N * sum_i terms[i] * (N kappa)^{-i}

    ``terms`` is sparse (zero coefficients dropped).  ``truncated_at`` is the
    largest order that was computed when the series may continue past it, and
    ``None`` when the expansion is known to terminate within the computed
    range.
    """

    family: str
    regime: str
    k: int
    scheme: str
    terms: Tuple[Tuple[int, sympy.Expr], ...]
    truncated_at: Optional[int]

    def coefficient(self, i: int) -> sympy.Expr:
        for j, c in self.terms:
            if j == i:
                return c
        if self.truncated_at is not None and i > self.truncated_at:
            raise SeriesTruncationError(
                f"coefficient at order 1/N^{i} was not computed "
                f"(expansion truncated at {self.truncated_at})")
        return sympy.Integer(0)

    def as_expr(self, n_symbol: sympy.Symbol = N) -> sympy.Expr:
        """The (possibly truncated) expansion as a rational expression."""
        if self.scheme == "scaled":
            return sympy.Add(*(c * n_symbol ** (-i) for i, c in self.terms))
        return n_symbol * sympy.Add(
            *(c * (n_symbol * KAPPA) ** (-i) for i, c in self.terms))

    def raw_expr(self) -> sympy.Expr:
        """Unscaled moment: N^k * m~_k for laguerre, m_k itself for jacobi."""
        if self.family == "laguerre":
            return N ** self.k * self.as_expr()
        if self.family == "jacobi":
            return self.as_expr()
        raise StructuralError(
            "raw moments are only defined for laguerre and jacobi tables")

    def degree_in_invN(self) -> int:
        return max((i for i, _ in self.terms), default=0)


@dataclasses.dataclass(frozen=True)
class ExactMoment:
    """A finite-N moment as an exact rational function of N."""

    k: int
    value: sympy.Expr

    def evaluate(self, kappa, n, alpha1, alpha2) -> Fraction:
        """Exact evaluation; a genuine pole raises EvaluationError."""
        binding = {KAPPA: _rat(kappa), N: _rat(n),
                   ALPHA1: _rat(alpha1), ALPHA2: _rat(alpha2)}
        return _staged_eval(self.value, binding, f"moment m_{self.k}")

    def large_N(self, orders: int) -> sympy.Expr:
        """Leading ``orders`` terms of the 1/N expansion (starting at N^1)."""
        u = sympy.Dummy("u", positive=True)
        ser = sympy.series(self.value.subs(N, 1 / u), u, 0, orders - 1).removeO()
        return sympy.expand(ser.subs(u, 1 / N))


def _rat(x) -> Rational:
    if isinstance(x, float):
        raise StructuralError(
            f"refusing the inexact float {x!r}; pass an int, Fraction, "
            "or a string like '3/2'")
    if isinstance(x, sympy.Expr):
        if not x.is_Rational:
            raise StructuralError(f"exact rational expected, got {x}")
        return x
    f = Fraction(x)
    return Rational(f.numerator, f.denominator)


def _to_fraction(x: sympy.Expr) -> Fraction:
    x = sympy.nsimplify(x, rational=True) if not x.is_Rational else x
    return Fraction(int(x.p), int(x.q))


def _staged_eval(expr: sympy.Expr, binding: dict, what: str) -> Fraction:
    """Evaluate a rational expression at an exact binding.

    A partial-fraction form can hit a pole surface at a point where the
    restriction to the bound parameter slice is perfectly finite (the block's
    numerator dies on the whole slice).  So when the one-shot denominator
    vanishes, bind everything except N first, cancel in N, and try again;
    only a zero denominator that survives the cancellation is a pole.
    """
    num, den = expr.as_numer_denom()
    den_val = den.subs(binding)
    if den_val != 0:
        return _to_fraction(num.subs(binding) / den_val)
    params = {s: v for s, v in binding.items() if s != N}
    den_slice = den.subs(params)
    if den_slice != 0:
        reduced = cancel(num.subs(params) / den_slice)
        num2, den2 = reduced.as_numer_denom()
        den_val = den2.subs(binding)
        if den_val != 0:
            return _to_fraction(num2.subs(binding) / den_val)
    raise EvaluationError(f"{what} has a pole at {binding}")


# ---------------------------------------------------------------------------
# series routes
# ---------------------------------------------------------------------------

def _tail_coefficients(table: CorrelatorTable, l: int, k_max: int,
                       scaled: bool) -> list:
    try:
        fn = table[(1, l)]
    except SchedulingError as exc:
        raise SeriesTruncationError(
            f"moment coefficient at order 1/N^{l} needs W_1^{l}, "
            "which is not in the table") from exc
    ser = fn.series_at_infinity(k_max + 1)
    if ser.has_poly_part():
        raise ConsistencyError("one-point function grows at infinity")
    half = l if scaled else 0
    return [to_parameter_expr(ser.coeff(k + 1), half_powers=half)
            for k in range(k_max + 1)]


def expand_moments(table: CorrelatorTable, k_max: int,
                   l_max: int) -> list:
    """1/N moment expansions for k = 0..k_max from the table's ``W_1^l``.

    Needs ``W_1^0 .. W_1^{l_max}`` solved; a missing order raises
    :class:`SeriesTruncationError` naming it.
    """
    if k_max < 0 or l_max < 0:
        raise StructuralError("k_max and l_max must be non-negative")
    spec = table.spec
    scaled = spec.family in ("gaussian", "laguerre")
    per_l = [_tail_coefficients(table, l, k_max, scaled)
             for l in range(l_max + 1)]
    out = []
    for k in range(k_max + 1):
        terms = tuple((l, per_l[l][k]) for l in range(l_max + 1)
                      if per_l[l][k] != 0)
        exact = scaled and l_max >= k
        out.append(MomentExpansion(
            family=spec.family, regime=spec.regime, k=k,
            scheme="scaled" if scaled else "unscaled",
            terms=terms, truncated_at=None if exact else l_max))
    return out


def expand_negative_moments(table: CorrelatorTable, k_max: int,
                            l_max: int) -> list:
    """Expansions of m~_{-k}, k = 1..k_max, via the small-s series.

    Only meaningful when the spectrum stays away from the origin, which among
    the built-in tables is the laguerre orderN-one-sided regime.
    """
    spec = table.spec
    if (spec.family, spec.regime) != ("laguerre", "orderN-one-sided"):
        raise CapabilityError(
            "negative moments need a spectrum bounded away from 0; "
            "only the laguerre orderN-one-sided table qualifies")
    if k_max < 1 or l_max < 0:
        raise StructuralError("need k_max >= 1 and l_max >= 0")
    per_l = []
    for l in range(l_max + 1):
        try:
            fn = table[(1, l)]
        except SchedulingError as exc:
            raise SeriesTruncationError(
                f"moment coefficient at order 1/N^{l} needs W_1^{l}, "
                "which is not in the table") from exc
        tay = fn.series_at_zero(k_max - 1)
        # T(s) = -sum_{k>=1} m_{-k} s^{k-1} left of the support
        per_l.append([-to_parameter_expr(tay[k - 1], half_powers=l)
                      for k in range(1, k_max + 1)])
    out = []
    for k in range(1, k_max + 1):
        terms = tuple((l, per_l[l][k - 1]) for l in range(l_max + 1)
                      if per_l[l][k - 1] != 0)
        out.append(MomentExpansion(
            family=spec.family, regime=spec.regime, k=-k, scheme="scaled",
            terms=terms, truncated_at=l_max))
    return out


# ---------------------------------------------------------------------------
# classical closed forms
# ---------------------------------------------------------------------------

def catalan(k: int) -> int:
    """binom(2k, k)/(k+1)."""
    if k < 0:
        raise StructuralError("catalan index must be >= 0")
    return int(binomial(2 * k, k) / (k + 1))


def narayana_moment(k: int, ta=TA1) -> sympy.Expr:
    """Narayana polynomial value N_k(1 + ta), as the finite double-binomial
    sum; ``narayana_moment(k, 0) == catalan(k)``.

    The leading coefficient of the shifted-support (orderN) expansion is
    ``(1 + ta)`` times this for k >= 1 (and exactly 1 at k = 0); see the
    series comparisons in the test-suite.
    """
    if k < 0:
        raise StructuralError("moment index must be >= 0")
    if k == 0:
        return sympy.Integer(1)
    return sympy.expand(Rational(1, k) * sympy.Add(
        *(binomial(k, j) * binomial(k, j - 1) * (ta + 1) ** (j - 1)
          for j in range(1, k + 1))))


def a1_fixed(k: int, alpha1=ALPHA1, kappa=KAPPA) -> sympy.Expr:
    """1/N coefficient of the fixed-parameter laguerre moment m~_k."""
    if k < 0:
        raise StructuralError("moment index must be >= 0")
    d = 1 if k == 0 else 0
    return cancel((alpha1 / (2 * kappa)) * (binomial(2 * k, k) - d)
                  - Rational(1, 4) * (1 - 1 / kappa) * (4 ** k - d))


def gegenbauer(n: int, mu, x) -> sympy.Expr:
    """Gegenbauer polynomial C_n^{(mu)}(x) as the explicit finite sum;
    zero for n < 0."""
    if n < 0:
        return sympy.Integer(0)
    mu = sympy.nsimplify(mu, rational=True)
    return sympy.expand(sympy.Add(
        *((-1) ** j * sympy.rf(mu, n - j)
          / (sympy.factorial(j) * sympy.factorial(n - 2 * j))
          * (2 * x) ** (n - 2 * j) for j in range(n // 2 + 1))))


def a1_orderN(k: int, ta=TA1, kappa=KAPPA) -> sympy.Expr:
    """1/N coefficient of the orderN laguerre moment m~_k, assembled from
    Gegenbauer polynomials at 1 + 2/ta."""
    if k < 0:
        raise StructuralError("moment index must be >= 0")
    if k == 0:
        return sympy.Integer(0)
    z = 1 + 2 / ta
    m = k - 1
    return cancel((ta ** (m + 1) * (1 - 1 / kappa) / 2) * (
        gegenbauer(m, Rational(1, 2), z) + gegenbauer(m - 1, 1, z)
        - (ta + 2) / ta * gegenbauer(m, 1, z)))


def negative_moment(i: int, k: int, ta=TA1, kappa=KAPPA) -> sympy.Expr:
    """Closed form for the order-1/N^i coefficient of m~_{-k} (orderN
    laguerre), for i in {0, 1}.

    The i = 1 value is the conventional Gegenbauer combination; the series
    route (:func:`expand_negative_moments`) produces its negative — the two
    conventions differ by the branch of the surd on the left of the support.
    """
    if i not in (0, 1):
        raise CapabilityError(
            "closed forms carry the negative moments to order 1/N only")
    if k < 0:
        raise StructuralError("negative-moment index k must be >= 0")
    if k == 0:
        return sympy.Integer(1) if i == 0 else sympy.Integer(0)
    if i == 0:
        low = sympy.Integer(1) if k == 1 else (ta + 1) * narayana_moment(k - 1, ta)
        return cancel(ta ** (1 - 2 * k) * low)
    z = 1 + 2 / ta
    return cancel((ta ** (-k) * (1 - 1 / kappa) / 2) * (
        -gegenbauer(k, Rational(1, 2), z) + gegenbauer(k, 1, z)
        - (ta + 2) / ta * gegenbauer(k - 1, 1, z)))


# ---------------------------------------------------------------------------
# exact Jacobi moments and the circular specialization
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def jacobi_exact_m1() -> ExactMoment:
    """First Jacobi moment, exact at finite N."""
    value = N * ((N - 1) * KAPPA + ALPHA1 + 1) / (
        2 * (N - 1) * KAPPA + ALPHA1 + ALPHA2 + 2)
    return ExactMoment(k=1, value=value)


@lru_cache(maxsize=None)
def jacobi_exact_m3() -> ExactMoment:
    """Third Jacobi moment, exact at finite N (partial-fraction form)."""
    a, b, K = ALPHA1, ALPHA2, KAPPA
    d = (a - b) * (a + b - 2 * K + 2)
    value = (
        Rational(5, 16) * N
        + Rational(1, 32) * (5 * a - 11 * b + 3 * K - 3) / K
        - Rational(1, 128) * (a - b) * (a + b - 2 * K + 2) / K ** 3
        * (d - 4 * K) * (d - 8 * K)
        / (2 * K * N + a + b - 2 * K + 2)
        + Rational(1, 32) * (a - b + 1) * (a - b - 1)
        * (a + b - 2 * K + 1) * (a + b - 2 * K + 3)
        / (K * (K + 1) * (2 * K + 1))
        * (d - 6 * K - 3) / (2 * K * N + a + b - 2 * K + 3)
        + Rational(1, 32) * (a - b - K) * (a - b + K)
        * (a + b - 3 * K + 2) * (a + b - K + 2)
        / (K ** 3 * (K + 1) * (K + 2))
        * (d - 3 * K ** 2 - 6 * K) / (2 * K * N + a + b - 3 * K + 2)
        - Rational(1, 128) * (a - b + 2 * K) * (a - b) * (a - b - 2 * K)
        / (K ** 3 * (K + 1) * (2 * K + 1))
        * (a + b + 2) * (a + b - 2 * K + 2) * (a + b - 4 * K + 2)
        / (2 * K * N + a + b - 4 * K + 2)
        - Rational(1, 128) * (a - b - 2) * (a - b) * (a - b + 2)
        / (K * (K + 1) * (K + 2))
        * (a + b - 2 * K) * (a + b - 2 * K + 4) * (a + b - 2 * K + 2)
        / (2 * K * N + a + b - 2 * K + 4)
    )
    return ExactMoment(k=3, value=value)


@lru_cache(maxsize=None)
def _circular_symbolic(l: int) -> sympy.Expr:
    """M_l by specializing the exact Jacobi moment.

    The divisor vanishes at the binding point, so the quotient is cancelled
    as a rational function of alpha1 first and alpha1 is substituted after.
    """
    em = {1: jacobi_exact_m1, 3: jacobi_exact_m3}[l]()
    quotient = cancel(together(
        em.value.subs(ALPHA2, 0) / (ALPHA1 / KAPPA + 1 / KAPPA + N - 1)))
    return cancel(quotient.subs(ALPHA1, -KAPPA * N + KAPPA - 1))


@lru_cache(maxsize=None)
def _circular_m3_partial_fractions() -> sympy.Expr:
    K = KAPPA
    return (1 + (K - 1) / (K * N - K + 1)
            - 4 * K * (K - 1) * (K - 2)
            / ((K + 1) * (2 * K + 1) * (K * N - K + 2))
            + 4 * (K - 1) * (2 * K - 1)
            / ((K + 1) * (K + 2) * (K * N - 2 * K + 1))
            + (K - 1) * (K - 2) * (K - 3)
            / ((K + 1) * (K + 2) * (K * N - K + 3))
            + (K - 1) * (2 * K - 1) * (3 * K - 1)
            / ((K + 1) * (2 * K + 1) * (K * N - 3 * K + 1)))


def circular_M(l: int, kappa, n, route: str = "specialization") -> Fraction:
    """Circular-ensemble moment M_l at exact rational (kappa, N).

    ``route="specialization"`` evaluates the Jacobi specialization for
    l in {1, 3}; ``route="partial-fractions"`` evaluates the explicit
    partial-fraction form, available for l = 3 only.  Denominator zeros
    (kappa N - kappa + 1 and friends) raise :class:`EvaluationError`.
    """
    if l not in (1, 2, 3):
        raise StructuralError("circular moments are available for l in {1,2,3}")
    if l == 2:
        raise CapabilityError(
            "the exact second Jacobi moment is not carried by this package, "
            "so M_2 has no implemented route")
    if route == "specialization":
        expr = _circular_symbolic(l)
    elif route == "partial-fractions":
        if l != 3:
            raise StructuralError(
                "the partial-fraction form is available for l = 3 only")
        expr = _circular_m3_partial_fractions()
    else:
        raise StructuralError(f"unknown route {route!r}")
    binding = {KAPPA: _rat(kappa), N: _rat(n)}
    return _staged_eval(expr, binding, f"M_{l}")


# ---------------------------------------------------------------------------
# symmetries and regime consistency
# ---------------------------------------------------------------------------

_SWAP = {KAPPA: 1 / KAPPA, N: -KAPPA * N,
         ALPHA1: -ALPHA1 / KAPPA, ALPHA2: -ALPHA2 / KAPPA}


def laguerre_moment_symmetry_check(expansion: MomentExpansion) -> bool:
    """m_k(kappa, N, alpha1) == (-kappa)^{-k} m_k(1/kappa, -kappa N, -alpha1/kappa)
    as a rational identity, with m_k = N^k m~_k."""
    if expansion.family != "laguerre" or expansion.k < 0:
        raise StructuralError("needs a non-negative laguerre moment expansion")
    if expansion.truncated_at is not None:
        raise SeriesTruncationError(
            "the inversion symmetry needs the full polynomial in 1/N "
            f"(expand with l_max >= {expansion.k})")
    m = N ** expansion.k * expansion.as_expr()
    swapped = m.subs(_SWAP, simultaneous=True)
    return cancel(m - (-KAPPA) ** (-expansion.k) * swapped) == 0


def jacobi_moment_symmetry_check(em: ExactMoment, samples: int = 5,
                                 seed: int = 7) -> bool:
    """m_k(kappa, N, alpha1, alpha2) == (-kappa)^{-1} m_k(1/kappa, -kappa N,
    -alpha1/kappa, -alpha2/kappa), tested at exact random rational bindings.

    The weight is k-independent: the Jacobi support never rescales with k, so
    the inversion carries a single overall factor.
    """
    rng = numpy.random.default_rng(seed)

    def q(lo, hi):
        return Rational(int(rng.integers(lo, hi)), int(rng.integers(1, 7)))

    for _ in range(samples):
        b = {KAPPA: q(1, 10), N: Rational(int(rng.integers(4, 25))),
             ALPHA1: q(-3, 9), ALPHA2: q(-3, 9)}
        lhs = em.value.subs(b)
        rhs = em.value.subs({KAPPA: 1 / b[KAPPA], N: -b[KAPPA] * b[N],
                             ALPHA1: -b[ALPHA1] / b[KAPPA],
                             ALPHA2: -b[ALPHA2] / b[KAPPA]})
        if cancel(lhs - (-1 / b[KAPPA]) * rhs) != 0:
            return False
    return True


def resolvent_kappa_inversion_check(fn: AlgebraicFn, l: int,
                                    family: str) -> bool:
    """Check W_1^l(s; kappa, params) against its kappa -> 1/kappa,
    params -> -params/kappa image.

    laguerre carries weight (-1)^l (the expansion parameter N sqrt(kappa)
    only flips sign); jacobi carries (-kappa)^l (its expansion parameter is
    N kappa, which maps to -N).
    """
    if family not in ("laguerre", "jacobi"):
        raise StructuralError("inversion symmetry applies to laguerre/jacobi")
    r = scalar("r")
    swapped = fn.substitute_params({
        "r": 1 / r,
        "a1": -scalar("a1") / r ** 2,
        "a2": -scalar("a2") / r ** 2,
    })
    weight = (-1) ** l if family == "laguerre" else (-(r ** 2)) ** l
    return swapped * weight == fn


def substituted_expansion_check(fixed_exp: MomentExpansion,
                                orderN_exp: MomentExpansion) -> bool:
    """Fixed-parameter moment polynomials stay valid under
    alpha1 = ta1 * N * kappa: compare against the orderN expansion.

    When the orderN side is truncated, only the available 1/N orders are
    compared.
    """
    if (fixed_exp.family, fixed_exp.regime) != ("laguerre", "fixed") \
            or orderN_exp.regime != "orderN-one-sided":
        raise StructuralError("expects a laguerre fixed / orderN pair")
    if fixed_exp.k != orderN_exp.k:
        raise StructuralError("moment indices differ")
    if fixed_exp.truncated_at is not None:
        raise SeriesTruncationError("fixed expansion must be complete")
    rhs = fixed_exp.as_expr().subs(ALPHA1, TA1 * N * KAPPA)
    lhs = orderN_exp.as_expr()
    if orderN_exp.truncated_at is None:
        return cancel(lhs - rhs) == 0
    u = sympy.Dummy("u", positive=True)
    diff = cancel(lhs - rhs).subs(N, 1 / u)
    ser = sympy.series(diff, u, 0, orderN_exp.truncated_at + 1).removeO()
    return all(cancel(ser.coeff(u, i)) == 0
               for i in range(orderN_exp.truncated_at + 1))


# ---------------------------------------------------------------------------
# diagnostics and emission
# ---------------------------------------------------------------------------

def denominator_zero_report(expansion: MomentExpansion) -> list:
    """Inspect the kappa-polynomials of an expansion at alpha1 = 0.

    For each order 1/N^i, clear the kappa^i denominator and report whether
    the remaining polynomial in kappa is (anti)palindromic and whether its
    zeros lie on the unit circle.  Observational output only — nothing here
    is asserted.
    """
    report = []
    for i, c in expansion.terms:
        c0 = cancel(c.subs({ALPHA1: 0, DELTA1: 0}))
        if c0 == 0:
            continue
        p = sympy.Poly(cancel(c0 * KAPPA ** i), KAPPA)
        coeffs = [Rational(x) for x in p.all_coeffs()]
        entry = {"i": i, "polynomial": str(p.as_expr()),
                 "palindromic": coeffs == coeffs[::-1]
                 or coeffs == [-x for x in coeffs[::-1]]}
        if p.degree() > 0:
            roots = numpy.roots([float(x) for x in coeffs])
            entry["zeros_on_unit_circle"] = bool(
                numpy.max(numpy.abs(numpy.abs(roots) - 1.0)) < 1e-9)
        else:
            entry["zeros_on_unit_circle"] = True
        report.append(entry)
    return report


def moment_csv_rows(expansions: Sequence[MomentExpansion],
                    bindings: Optional[Mapping[str, object]] = None) -> list:
    """Rows (ensemble, regime, k, i, coefficient, float) for CSV emission.

    With ``bindings`` (name -> exact rational) the float column holds the
    numeric coefficient; otherwise it is left empty for symbolic entries.
    """
    sub = {}
    if bindings:
        for name, val in bindings.items():
            if name not in _NAME_TO_SYM:
                raise StructuralError(f"unknown parameter {name!r}")
            sub[_NAME_TO_SYM[name]] = _rat(val)
    rows = [("ensemble", "regime", "k", "i", "coefficient", "float")]
    for exp in expansions:
        for i, c in exp.terms:
            cv = cancel(c.subs(sub)) if sub else c
            as_float = "" if cv.free_symbols else repr(float(cv))
            rows.append((exp.family, exp.regime, exp.k, i, str(c), as_float))
    return rows


def exact_moment_record(em: ExactMoment) -> dict:
    """JSON-ready record of an exact rational moment."""
    num, den = together(em.value).as_numer_denom()
    return {
        "k": em.k,
        "value": str(em.value),
        "numerator": str(sympy.expand(num)),
        "denominator": str(sympy.expand(den)),
        "symbols": sorted(str(s) for s in em.value.free_symbols),
    }
