"""Smoothed eigenvalue densities recovered from one-point resolvent data.

Each expansion coefficient of the one-point resolvent is a function
``c0(s) + c1(s) y(s)`` with ``y = sqrt((s-a)(s-b))`` cut along the support.
Its inverse Stieltjes transform splits into two sharply different pieces:

* the surd part jumps across the cut and produces a *bulk* density, a sum of
  rational prefactors times half-integer powers of ``P(x) = (x-a)(b-x)``
  (with boundary value ``y(x + i0) = +i sqrt(P(x))`` the jump contributes
  ``-c1(x) sqrt(P(x)) / pi``);
* poles of the rational part sitting at the hard walls or the support edges
  become a Dirac comb: ``(s-c)^(-m)`` maps to
  ``(-1)^(m-1)/(m-1)! * delta^(m-1)(x-c)``.

Everything is kept exact.  Bulk prefactors and delta coefficients live in the
parameter field; supports whose endpoints are irrational over that field
(the two-sided Jacobi regime) are handled in the quadratic extension by
``Delta = b - a``, and results are only accepted once the extension part
cancels.  Moments of the subleading densities are defined by analytic
continuation of the Euler beta integral; they reproduce the resolvent's
``1/s`` expansion coefficients exactly, including for densities whose edge
singularities are no longer integrable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .algebra import (
    AlgebraError,
    AlgebraicFn,
    CapabilityError,
    ParamScalar,
    QuadraticSupport,
    StructuralError,
    _SIGN_REFERENCE,
    _scalar_exact_sqrt,
    _zero_series_of_poly,
    numeric_env,
)

__all__ = [
    "DecompositionError",
    "RegularizationError",
    "BulkTerm",
    "DeltaTerm",
    "DensityExpansion",
    "GridEvaluation",
    "inverse_stieltjes",
    "eval_bulk",
    "delta_records",
    "regularized_moment",
    "stieltjes_roundtrip_check",
    "edge_moment_recursion_check",
    "density_csv_rows",
]


class DecompositionError(AlgebraError):
    """The rational part of a correlator has poles outside the known walls."""


class RegularizationError(AlgebraError):
    """A regularized integral cannot be reduced to beta-function data."""


_ZERO = ParamScalar.from_rational(0)
_ONE = ParamScalar.from_rational(1)


# ---------------------------------------------------------------------------
# dense polynomials over the parameter field (coefficient lists, low first)
# ---------------------------------------------------------------------------

def _ptrim(c: list) -> list:
    while c and c[-1].is_zero():
        c.pop()
    return c


def _padd(f: Sequence[ParamScalar], g: Sequence[ParamScalar]) -> list:
    n = max(len(f), len(g))
    out = []
    for i in range(n):
        a = f[i] if i < len(f) else _ZERO
        b = g[i] if i < len(g) else _ZERO
        out.append(a + b)
    return _ptrim(out)


def _pscale(f: Sequence[ParamScalar], c) -> list:
    return _ptrim([x * c for x in f])


def _pmul(f: Sequence[ParamScalar], g: Sequence[ParamScalar]) -> list:
    if not f or not g:
        return []
    out = [_ZERO] * (len(f) + len(g) - 1)
    for i, a in enumerate(f):
        if a.is_zero():
            continue
        for j, b in enumerate(g):
            out[i + j] = out[i + j] + a * b
    return _ptrim(out)


def _ppow(f: Sequence[ParamScalar], k: int) -> list:
    out = [_ONE]
    for _ in range(k):
        out = _pmul(out, f)
    return out


def _peval(f: Sequence[ParamScalar], x: ParamScalar) -> ParamScalar:
    acc = _ZERO
    for c in reversed(list(f)):
        acc = acc * x + c
    return acc


def _pdivmod(f: Sequence[ParamScalar], g: Sequence[ParamScalar]) -> tuple:
    """Polynomial division over the field: f = q*g + r with deg r < deg g."""
    g = _ptrim(list(g))
    if not g:
        raise StructuralError("division by the zero polynomial")
    r = list(f)
    q = [_ZERO] * max(0, len(f) - len(g) + 1)
    inv_lead = 1 / g[-1]
    while True:
        r = _ptrim(r)
        if len(r) < len(g):
            break
        k = len(r) - len(g)
        c = r[-1] * inv_lead
        q[k] = c
        for i, gc in enumerate(g):
            r[k + i] = r[k + i] - c * gc
    return _ptrim(q), r


def _pdivlin(f: Sequence[ParamScalar], c: ParamScalar) -> tuple:
    """Synthetic division by (x - c): (quotient, remainder = f(c))."""
    q = []
    acc = _ZERO
    for a in reversed(list(f)):
        acc = acc * c + a
        q.append(acc)
    rem = q.pop() if q else _ZERO
    q.reverse()
    return _ptrim(q), rem


def _strip_root(den: Sequence[ParamScalar], val: ParamScalar) -> tuple:
    """Remove every (x - val) factor: returns (stripped den, multiplicity)."""
    den = _ptrim(list(den))
    m = 0
    while den:
        q, r = _pdivlin(den, val)
        if not r.is_zero():
            break
        den = q
        m += 1
    return den, m


# ---------------------------------------------------------------------------
# quadratic extension by Delta = b - a  (Delta^2 = disc = e^2 - 4p)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Ext:
    u: ParamScalar
    v: ParamScalar


def _e_of(x) -> _Ext:
    return _Ext(ParamScalar._coerce(x), _ZERO)


def _eadd(x: _Ext, y: _Ext) -> _Ext:
    return _Ext(x.u + y.u, x.v + y.v)


def _emul(x: _Ext, y: _Ext, disc: ParamScalar) -> _Ext:
    return _Ext(x.u * y.u + x.v * y.v * disc, x.u * y.v + x.v * y.u)


def _escale(x: _Ext, c) -> _Ext:
    return _Ext(x.u * c, x.v * c)


def _epow(x: _Ext, k: int, disc: ParamScalar) -> _Ext:
    base = x
    if k < 0:
        nrm = x.u * x.u - x.v * x.v * disc
        if nrm.is_zero():
            raise StructuralError("non-invertible element of the extension")
        base = _Ext(x.u / nrm, -x.v / nrm)
        k = -k
    out = _e_of(1)
    for _ in range(k):
        out = _emul(out, base, disc)
    return out


# ---------------------------------------------------------------------------
# data model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BulkTerm:
    """One bulk contribution  prefactor(x) * P(x)**power / pi.

    ``power`` is half-odd (1/2 minus a nonnegative integer).  The prefactor
    is ``num/den`` as coefficient lists over the parameter field, with every
    root of ``den`` at a support endpoint already absorbed into ``power``.
    """

    power: Fraction
    num: tuple
    den: tuple


@dataclass(frozen=True)
class DeltaTerm:
    """coeff * delta^(order)(x - location).

    ``location`` is a wall/edge tag "0", "1", "a" or "b"; for supports whose
    endpoints live outside the parameter field the full coefficient reads
    ``coeff + coeff_surd * (b - a)``.
    """

    location: str
    order: int
    coeff: ParamScalar
    coeff_surd: ParamScalar


@dataclass(frozen=True)
class DensityExpansion:
    support: QuadraticSupport
    bulk: tuple
    deltas: tuple

    @property
    def has_nonintegrable_bulk(self) -> bool:
        return any(t.power <= -1 for t in self.bulk)

    def location_value(self, term: DeltaTerm) -> Optional[ParamScalar]:
        """Exact location, or None when it lies in the quadratic extension."""
        if term.location == "0":
            return _ZERO
        if term.location == "1":
            return _ONE
        return self.support.a if term.location == "a" else self.support.b

    def _location_ext(self, term: DeltaTerm) -> _Ext:
        if term.location == "0":
            return _e_of(0)
        if term.location == "1":
            return _e_of(1)
        half = Fraction(1, 2) if term.location == "b" else Fraction(-1, 2)
        return _Ext(self.support.e * Fraction(1, 2),
                    ParamScalar.from_rational(half))


@dataclass(frozen=True)
class GridEvaluation:
    values: tuple          # float or None per grid point
    flags: tuple           # "ok" | "outside-support"
    endpoints: tuple       # (a, b) as floats
    non_integrable: bool   # some bulk power <= -1


# ---------------------------------------------------------------------------
# coefficient extraction
# ---------------------------------------------------------------------------

def _coeff_poly_pair(fn: AlgebraicFn, eps: tuple) -> tuple:
    """The eps-coefficient of fn as (num, den) coefficient lists in s."""
    c = fn.coeffs.get(eps)
    if c is None:
        return [], [_ONE]
    fgens = fn.field_gens()
    pgens = fn.gens

    def lists(poly):
        buckets = _zero_series_of_poly(poly, fgens, pgens)
        out = [_ZERO] * (max(buckets) + 1 if buckets else 0)
        for k, elem in buckets.items():
            out[k] = ParamScalar(pgens, elem)
        return _ptrim(out)

    return lists(c.numer), lists(c.denom)


def _wall_candidates(support: QuadraticSupport) -> tuple:
    """Wall points split into support endpoints and strictly-off-support ones."""
    on = []
    if support.has_endpoints:
        on = [("a", support.a), ("b", support.b)]
    off = [(tag, val) for tag, val in (("0", _ZERO), ("1", _ONE))
           if all(val != v for _, v in on)]
    return on, off


def _wall_side(sup: QuadraticSupport, val: ParamScalar) -> int:
    """-1 if the wall sits left of the support, +1 if right of it.

    The admissible parameter domain is connected and no wall crosses an
    endpoint inside it, so one reference point decides the side globally.
    """
    env = numeric_env(dict(_SIGN_REFERENCE))
    a_f, b_f = sup.endpoints_float(env)
    w_f = val.eval_float(env)
    if w_f < a_f:
        return -1
    if w_f > b_f:
        return 1
    raise DecompositionError("pole inside the support interval")


def _y_taylor(sup: QuadraticSupport, w: ParamScalar, rho: ParamScalar,
              n_terms: int) -> list:
    """Taylor coefficients of sqrt(R(w+u))/rho around u = 0, rho^2 = R(w)."""
    if n_terms <= 0:
        return []
    # R(w+u) = rho^2 (1 + z),  z = (2w - e) u / rho^2 + u^2 / rho^2
    rho2 = rho * rho
    z = [_ZERO, (w * 2 - sup.e) / rho2, 1 / rho2]
    out = [_ZERO] * n_terms
    out[0] = _ONE
    zpow = [_ONE]
    coeff = Fraction(1)
    for m in range(1, n_terms):
        coeff *= Fraction(3 - 2 * m, 2 * m)  # binom(1/2, m)/binom(1/2, m-1)
        zpow = _pmul(zpow, z)[:n_terms]
        for k, c in enumerate(zpow):
            if not c.is_zero():
                out[k] = out[k] + c * coeff
    return out


# ---------------------------------------------------------------------------
# decomposition
# ---------------------------------------------------------------------------

def inverse_stieltjes(fn: AlgebraicFn,
                      support: Optional[QuadraticSupport] = None) -> DensityExpansion:
    """Exact distributional inverse Stieltjes transform of a resolvent term.

    Accepts only the shapes solved hierarchy coefficients actually take:
    rational-part poles at the spectrum walls (x = 0, 1) or at the support
    edges, plus a surd part.  Anything else raises DecompositionError rather
    than guessing.
    """
    if fn.nvars != 1:
        raise StructuralError("inverse transform defined for one-point data only")
    sup = fn.support
    if support is not None and support != sup:
        raise StructuralError("explicit support disagrees with the correlator's")
    if fn.series_at_infinity(0).has_poly_part():
        raise DecompositionError(
            "correlator does not decay at infinity; not a resolvent expansion term")

    on_walls, off_walls = _wall_candidates(sup)
    disc = sup.e * sup.e - sup.p * 4
    deltas = []

    num, den = _coeff_poly_pair(fn, (0,))
    num1, den1 = _coeff_poly_pair(fn, (1,))

    # ---- rational-part poles at the support edges -> Dirac comb -----------
    # (the surd vanishes there, so the residues are read off c0 alone)
    if num and len(num) >= len(den):
        # an entire component has no jump and carries no mass; overall decay
        # was already checked against the surd part, so drop it
        _, num = _pdivmod(num, den)
    for tag, val in on_walls:
        if not num:
            break
        den, mult = _strip_root(den, val)
        for j in range(mult, 0, -1):
            res = _peval(num, val) / _peval(den, val)
            if not res.is_zero():
                w = Fraction((-1) ** (j - 1), math.factorial(j - 1))
                deltas.append(DeltaTerm(tag, j - 1, res * w, _ZERO))
            num, _ = _pdivlin(_padd(num, _pscale(den, -res)), val)

    # ---- strictly-off-support walls: joint singular parts of c0 + c1 y ----
    # y is analytic across such a wall, so the pole of the rational part can
    # be (and for genuine resolvent data, largely is) cancelled by c1 y
    for tag, val in off_walls:
        sing = {}
        if num:
            den, mult = _strip_root(den, val)
            for j in range(mult, 0, -1):
                res = _peval(num, val) / _peval(den, val)
                sing[j] = res
                num, _ = _pdivlin(_padd(num, _pscale(den, -res)), val)
        if num1:
            n1c, d1c = list(num1), list(den1)
            d1c, m1 = _strip_root(d1c, val)
            if m1:
                b_res = {}
                for j in range(m1, 0, -1):
                    res = _peval(n1c, val) / _peval(d1c, val)
                    b_res[j] = res
                    n1c, _ = _pdivlin(_padd(n1c, _pscale(d1c, -res)), val)
                try:
                    rho = sup.sqrt_R_at(val)
                except CapabilityError as exc:
                    raise DecompositionError(
                        f"cannot resolve the branch at the wall x = {val}: {exc}"
                    ) from None
                rho = rho * _wall_side(sup, val)
                tay = _y_taylor(sup, val, rho, m1)
                for m in range(1, m1 + 1):
                    extra = _ZERO
                    for k in range(m1 - m + 1):
                        extra = extra + b_res.get(m + k, _ZERO) * tay[k]
                    sing[m] = sing.get(m, _ZERO) + extra * rho
        for j, res in sorted(sing.items(), reverse=True):
            if not res.is_zero():
                w = Fraction((-1) ** (j - 1), math.factorial(j - 1))
                deltas.append(DeltaTerm(tag, j - 1, res * w, _ZERO))

    # ---- leftover rational part: endpoint-pair poles via their quadratic --
    if num:
        if len(den) >= 3:
            body = list(den)
            k = 0
            while len(body) >= 3:
                quot, rem = _pdivmod(body, [sup.p, -sup.e, _ONE])
                if rem:
                    raise DecompositionError(
                        "rational part has poles away from the spectrum walls")
                body, k = quot, k + 1
            if len(body) != 1:
                raise DecompositionError(
                    "rational part has poles away from the spectrum walls")
            if disc.is_zero():
                raise DecompositionError("degenerate support")
            d0 = body[0]
            scaled = [c / d0 for c in num]
            # Laurent data at s = b; the a-side is its surd conjugate
            bE = _Ext(sup.e * Fraction(1, 2),
                      ParamScalar.from_rational(Fraction(1, 2)))
            shifted_num = []
            for t in range(len(scaled)):
                acc = _e_of(0)
                for j in range(t, len(scaled)):
                    acc = _eadd(acc, _escale(_epow(bE, j - t, disc),
                                             math.comb(j, t) * scaled[j]))
                shifted_num.append(acc)
            for j in range(1, k + 1):
                B = _e_of(0)
                for t in range(0, k - j + 1):
                    if t >= len(shifted_num):
                        break
                    m = k - j - t
                    term = _emul(shifted_num[t],
                                 _epow(_Ext(_ZERO, _ONE), -(k + m), disc),
                                 disc)
                    B = _eadd(B, _escale(term,
                                         (-1) ** m * math.comb(k - 1 + m, m)))
                w = Fraction((-1) ** (j - 1), math.factorial(j - 1))
                if not (B.u.is_zero() and B.v.is_zero()):
                    deltas.append(DeltaTerm("b", j - 1, B.u * w, B.v * w))
                    deltas.append(DeltaTerm("a", j - 1, B.u * w, -(B.v * w)))
        elif len(den) == 2:
            raise DecompositionError(
                "rational part has a single pole away from the spectrum walls")
        elif _ptrim(num):
            raise DecompositionError("leftover polynomial in the rational part")

    # ---- surd part -> bulk -------------------------------------------------
    bulk = []
    if num1:
        if sup.has_endpoints:
            den1, ia = _strip_root(den1, sup.a)
            den1, ib = _strip_root(den1, sup.b)
            depth = max(ia, ib)
            # 1/(x-a)^ia 1/(x-b)^ib = (x-a)^(d-ia) (b-x)^(d-ib) (-1)^ib P^-d
            num1 = _pmul(num1, _pmul(_ppow([-sup.a, _ONE], depth - ia),
                                     _ppow([sup.b, -_ONE], depth - ib)))
            sign = Fraction((-1) ** (ib + 1))
        else:
            depth = 0
            while len(den1) > 2:
                q, r = _pdivmod(den1, [sup.p, -sup.e, _ONE])
                if r:
                    break  # leftover wall factors stay in the prefactor
                den1, depth = q, depth + 1
            sign = Fraction((-1) ** (depth + 1))
        num1 = _pscale(num1, sign)
        if num1:
            bulk.append(BulkTerm(Fraction(1, 2) - depth, tuple(num1), tuple(den1)))

    return DensityExpansion(sup, tuple(bulk), tuple(deltas))


# ---------------------------------------------------------------------------
# pointwise evaluation
# ---------------------------------------------------------------------------

def eval_bulk(d: DensityExpansion, grid: Sequence[float],
              bindings: Optional[Mapping] = None) -> GridEvaluation:
    """Evaluate the bulk part at real grid points.

    Delta terms are never evaluated pointwise (see :func:`delta_records`);
    points outside the open support get value None and a per-point flag
    instead of a global error.
    """
    env = numeric_env(dict(bindings or {}))
    a_f, b_f = d.support.endpoints_float(env)
    terms = []
    for t in d.bulk:
        nf = [c.eval_float(env) for c in t.num]
        df = [c.eval_float(env) for c in t.den]
        terms.append((float(t.power), nf, df))

    def horner(coeffs, x):
        acc = 0.0
        for c in reversed(coeffs):
            acc = acc * x + c
        return acc

    values, flags = [], []
    for x in grid:
        x = float(x)
        if not (a_f < x < b_f):
            values.append(None)
            flags.append("outside-support")
            continue
        pval = (x - a_f) * (b_f - x)
        tot = 0.0
        for pw, nf, df in terms:
            tot += horner(nf, x) / horner(df, x) * pval ** pw
        values.append(tot / math.pi)
        flags.append("ok")
    return GridEvaluation(tuple(values), tuple(flags), (a_f, b_f),
                          d.has_nonintegrable_bulk)


def delta_records(d: DensityExpansion,
                  bindings: Optional[Mapping] = None) -> list:
    """The Dirac comb as structured records (exact strings, optional floats)."""
    env = numeric_env(dict(bindings)) if bindings is not None else None
    out = []
    for t in d.deltas:
        rec = {
            "location": t.location,
            "order": t.order,
            "coefficient": str(t.coeff) if t.coeff_surd.is_zero()
            else f"({t.coeff}) + ({t.coeff_surd})*(b - a)",
        }
        loc = d.location_value(t)
        if loc is not None:
            rec["location_exact"] = str(loc)
        if env is not None:
            a_f, b_f = d.support.endpoints_float(env)
            rec["location_value"] = {"a": a_f, "b": b_f}.get(
                t.location, float(int(t.location)) if t.location in "01" else None)
            rec["coefficient_value"] = (t.coeff.eval_float(env)
                                        + t.coeff_surd.eval_float(env) * (b_f - a_f))
        out.append(rec)
    return out


# ---------------------------------------------------------------------------
# regularized moments
# ---------------------------------------------------------------------------

def _gamma_half(z: Fraction) -> Fraction:
    """Gamma(z)/sqrt(pi) for half-odd z, via the functional equation."""
    if z.denominator != 2:
        raise StructuralError(f"{z} is not half-odd")
    r = Fraction(1)
    z0 = Fraction(1, 2)
    while z0 < z:
        r *= z0
        z0 += 1
    while z0 > z:
        z0 -= 1
        r /= z0
    return r


def _beta_over_pi(alpha: Fraction, beta: Fraction) -> Fraction:
    """B(alpha, beta)/pi for half-odd arguments, analytically continued.

    alpha + beta is an integer; a Gamma pole downstairs kills the term.
    """
    s = alpha + beta
    if s <= 0:
        return Fraction(0)
    return _gamma_half(alpha) * _gamma_half(beta) / math.factorial(int(s) - 1)


class _EdgeIntegrals:
    """(1/pi) * int_a^b x^n P(x)^q dx in the quadratic extension by b - a.

    q is half-odd; n may be negative when 0 lies strictly outside [a, b].
    Values are continued in q through the beta function: a term whose beta
    denominator hits a Gamma pole vanishes, which is exactly what renders
    the moments of non-integrable subleading densities finite.
    """

    def __init__(self, e: ParamScalar, p: ParamScalar, disc: ParamScalar):
        self.e = e
        self.p = p
        self.disc = disc
        self.aE = _Ext(e * Fraction(1, 2),
                       ParamScalar.from_rational(Fraction(-1, 2)))
        self.dE = _Ext(_ZERO, _ONE)
        self._memo = {}

    def any_power(self, n: int, q: Fraction) -> _Ext:
        return self.nonneg(n, q) if n >= 0 else self.negative(-n, q)

    def nonneg(self, n: int, q: Fraction) -> _Ext:
        key = ("+", n, q)
        if key not in self._memo:
            pows = [_e_of(1)]
            for _ in range(n):
                pows.append(_emul(pows[-1], self.aE, self.disc))
            tot = _e_of(0)
            for k in range(n + 1):
                w = _beta_over_pi(k + q + 1, q + 1) * math.comb(n, k)
                if w:
                    d_pow = _epow(self.dE, k + int(2 * q + 1), self.disc)
                    tot = _eadd(tot, _escale(
                        _emul(pows[n - k], d_pow, self.disc), w))
            self._memo[key] = tot
        return self._memo[key]

    def negative(self, i: int, q: Fraction) -> _Ext:
        key = ("-", i, q)
        if key not in self._memo:
            if 2 * q <= i - 2:
                val = self._reciprocal(i, q)
            else:
                # P = e x - p - x^2 lowers the half-integer power by one
                val = _eadd(
                    _escale(self.any_power(1 - i, q - 1), self.e),
                    _eadd(_escale(self.any_power(-i, q - 1), -self.p),
                          _escale(self.any_power(2 - i, q - 1), -1)))
            self._memo[key] = val
        return self._memo[key]

    def _reciprocal(self, i: int, q: Fraction) -> _Ext:
        # x -> 1/x maps the window to (1/b, 1/a) and pulls out (ab)^q
        sqrt_p = _scalar_exact_sqrt(self.p)
        if sqrt_p is None:
            raise RegularizationError(
                "wall pole needs sqrt(a*b) inside the parameter field")
        sub = _EdgeIntegrals(self.e / self.p, 1 / self.p,
                             self.disc / self.p ** 2)
        inner = sub.nonneg(i - int(2 * q) - 2, q)
        # sub's extension element is Delta' = Delta/p; rescale its surd part
        inner = _Ext(inner.u, inner.v / self.p)
        val = _escale(inner, sqrt_p ** int(2 * q))
        # (u^2)^(-q) = |u|^(-2q): on a window left of the origin an odd
        # 2q picks up a sign the monomial substitution does not see
        e_ref = self.e.eval_float(numeric_env(dict(_SIGN_REFERENCE)))
        if e_ref < 0 and int(2 * q) % 2 != 0:
            val = _escale(val, -1)
        return val


def regularized_moment(d: DensityExpansion, p: int,
                       bindings: Optional[Mapping] = None):
    """Exact p-th moment of the density, beta-continued at the edges.

    Returns a ParamScalar, or a Fraction when bindings pin every parameter.
    """
    if not isinstance(p, int) or isinstance(p, bool) or p < 0:
        raise StructuralError("moment exponent must be a nonnegative integer")
    sup = d.support
    disc = sup.e * sup.e - sup.p * 4
    ints = _EdgeIntegrals(sup.e, sup.p, disc)
    total = _e_of(0)

    for t in d.bulk:
        num = _pmul(list(t.num), [_ZERO] * p + [_ONE])
        den = list(t.den)
        probe, _ = _strip_root(den, _ZERO)
        probe, _ = _strip_root(probe, _ONE)
        if len(probe) != 1:
            raise RegularizationError(
                "bulk prefactor has poles away from the spectrum walls")
        if len(num) >= len(den):
            quot, num = _pdivmod(num, den)
            for n, c in enumerate(quot):
                if not c.is_zero():
                    total = _eadd(total, _escale(ints.nonneg(n, t.power), c))
        shifted = None
        for val in (_ONE, _ZERO):
            den, mult = _strip_root(den, val)
            for j in range(mult, 0, -1):
                res = _peval(num, val) / _peval(den, val)
                if not res.is_zero():
                    if val is _ZERO:
                        total = _eadd(total, _escale(
                            ints.negative(j, t.power), res))
                    else:
                        if shifted is None:
                            shifted = _EdgeIntegrals(
                                sup.e - 2, sup.p - sup.e + 1, disc)
                        total = _eadd(total, _escale(
                            shifted.negative(j, t.power), res))
                num, _ = _pdivlin(_padd(num, _pscale(den, -res)), val)

    for t in d.deltas:
        if t.order > p:
            continue
        w = Fraction((-1) ** t.order * math.perm(p, t.order))
        contrib = _epow(d._location_ext(t), p - t.order, disc)
        total = _eadd(total, _escale(
            _emul(_Ext(t.coeff, t.coeff_surd), contrib, disc), w))

    value = _collapse(total, sup)
    if bindings is not None:
        return value.eval_rational(dict(bindings))
    return value


def _collapse(x: _Ext, sup: QuadraticSupport) -> ParamScalar:
    if sup.has_endpoints:
        return x.u + x.v * (sup.b - sup.a)
    if not x.v.is_zero():
        raise StructuralError(
            "moment does not collapse to the parameter field; "
            "asymmetric endpoint data")
    return x.u


# ---------------------------------------------------------------------------
# checks and emission
# ---------------------------------------------------------------------------

def stieltjes_roundtrip_check(d: DensityExpansion, fn: AlgebraicFn,
                              order: int = 6) -> bool:
    """Moments of d reproduce the 1/s expansion of fn through s^-order."""
    ser = fn.series_at_infinity(order)
    return all(regularized_moment(d, k) == ser.coeff(k + 1)
               for k in range(order))


def edge_moment_recursion_check(sup: QuadraticSupport, p: int, m: int) -> bool:
    """Beta continuation is consistent with integration by parts.

    With M(p, q) = int x^p P^(-q/2) and q = 2m + 1:
        (1 - q/2) [(a+b) M(p-1, q) - 2 M(p, q)] = -(p-1) M(p-2, q-2)
    """
    if p < 2:
        raise StructuralError("recursion needs p >= 2")
    disc = sup.e * sup.e - sup.p * 4
    ints = _EdgeIntegrals(sup.e, sup.p, disc)
    q = Fraction(2 * m + 1)
    w = 1 - q / 2
    lhs = _eadd(
        _escale(_emul(_e_of(sup.e), ints.any_power(p - 1, -q / 2), disc), w),
        _escale(ints.any_power(p, -q / 2), -2 * w))
    rhs = _escale(ints.any_power(p - 2, -(q - 2) / 2), -(p - 1))
    diff = _eadd(lhs, _escale(rhs, -1))
    return diff.u.is_zero() and diff.v.is_zero()


def density_csv_rows(d: DensityExpansion, grid: Sequence[float],
                     bindings: Mapping, precision: int = 12) -> list:
    """Grid rows ("x", "bulk_value", "flag") ready for CSV emission."""
    ev = eval_bulk(d, grid, bindings)
    rows = [("x", "bulk_value", "flag")]
    for x, val, flag in zip(grid, ev.values, ev.flags):
        rows.append((f"{float(x):.{precision}g}",
                     "" if val is None else f"{val:.{precision}g}",
                     flag))
    return rows
