"""Triangular loop-equation systems for the classical beta ensembles.

The resolvent expansion coefficients W_n^l (n-point connected correlators,
order l in the large-N series) satisfy, for each ensemble family and
parameter regime, a triangular linear hierarchy once the leading W_1^0 is
known from a quadratic.  This module builds those equations out of the
surd algebra, solves them in the staircase schedule, and provides the
connected/unconnected conversion and the cross-family degeneration checks.

Supported (family, regime) combinations and their parameter generators:

    gaussian  fixed               r
    laguerre  fixed               r, a1
    laguerre  orderN-one-sided    r, g1
    laguerre  general-linear      r, d1, g1
    jacobi    fixed               r, a1, a2
    jacobi    orderN-one-sided    r, a2, d1, g1
    jacobi    orderN-two-sided    r, d1, d2, g1, g2

where r = sqrt(kappa), g_i = sqrt(1 + ta_i); a_i are the O(1) weight
exponents and d_i the O(1) offsets of O(N) exponents (alpha_i =
ta_i*N*kappa + d_i).

The Gaussian hierarchy is used in the scaling in which the eigenvalues are
divided by sqrt(2*N*kappa): the spectrum concentrates on (-1, 1) and
W_1^0(s) = 2(s - sqrt(s^2 - 1)).  This convention is recorded in every
emitted record.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import sympy

from .algebra import (
    AlgebraError,
    AlgebraicFn,
    CapabilityError,
    ParamScalar,
    QuadraticSupport,
    SPECTRAL_VARS,
    StructuralError,
    _canon_gens,
    _field,
    _frac_gen_series,
    _lift,
    _ser_add,
    _ser_mul,
    _ser_sqrt1p,
    _subs_gens,
    invert,
    scalar,
)

__all__ = [
    "ConsistencyError",
    "SchedulingError",
    "EnsembleSpec",
    "CorrelatorTable",
    "schedule_keys",
    "solve_leading",
    "w2_universal",
    "solve_order",
    "run_schedule",
    "equation_residual",
    "unknown_coefficient",
    "connected_from_unconnected",
    "unconnected_from_connected",
    "jacobi_limit_check",
]

FAMILIES = ("gaussian", "laguerre", "jacobi")
REGIMES = ("fixed", "orderN-one-sided", "orderN-two-sided", "general-linear")

_VALID = {
    ("gaussian", "fixed"),
    ("laguerre", "fixed"),
    ("laguerre", "orderN-one-sided"),
    ("laguerre", "general-linear"),
    ("jacobi", "fixed"),
    ("jacobi", "orderN-one-sided"),
    ("jacobi", "orderN-two-sided"),
}

ARITY_CAP = 3


class ConsistencyError(AlgebraError):
    """An internal cross-check (branch, discriminant, residual) failed."""


class SchedulingError(AlgebraError):
    """A prerequisite correlator is missing from the table."""


# ---------------------------------------------------------------------------
# ensemble specification
# ---------------------------------------------------------------------------

def _regime_support(family: str, regime: str) -> QuadraticSupport:
    if family == "gaussian":
        return QuadraticSupport.from_endpoints(-1, 1, label="gaussian")
    if family == "laguerre":
        if regime == "fixed":
            return QuadraticSupport.from_endpoints(0, 4, label="laguerre-fixed")
        g1 = scalar("g1")
        return QuadraticSupport.from_endpoints((g1 - 1) ** 2, (g1 + 1) ** 2,
                                               label="laguerre-hard-edge-lifted")
    # jacobi
    if regime == "fixed":
        return QuadraticSupport.from_endpoints(0, 1, label="jacobi-fixed")
    if regime == "orderN-one-sided":
        g1 = scalar("g1")
        ta1 = g1 * g1 - 1
        cm = ta1 * ta1 / ((ta1 + 2) * (ta1 + 2))
        return QuadraticSupport.from_endpoints(cm, 1, label="jacobi-one-sided")
    # two-sided: endpoints are roots of an irreducible quadratic; store e, p
    ta1, ta2 = scalar("ta1"), scalar("ta2")
    D = ta1 + ta2 + 2
    mid = ta1 / D + (ta2 + 1) * 2 / (D * D)
    e = mid * 2
    p = mid * mid - (ta1 + 1) * (ta2 + 1) * (ta1 + ta2 + 1) * 4 / (D ** 4)
    return QuadraticSupport(e, p, label="jacobi-two-sided")


class EnsembleSpec:
    """Family + parameter regime, with the derived support and generators."""

    __slots__ = ("family", "regime", "support")

    def __init__(self, family: str, regime: str = "fixed"):
        family = family.lower()
        regime = regime.replace("_", "-")
        if regime in ("orderN", "ordern", "one-sided", "ordern-one-sided"):
            regime = "orderN-one-sided"
        if regime in ("two-sided", "ordern-two-sided"):
            regime = "orderN-two-sided"
        if regime == "general-linear" or regime == "generallinear":
            regime = "general-linear"
        if (family, regime) not in _VALID:
            raise StructuralError(
                f"unsupported ensemble: family={family!r} regime={regime!r}; "
                f"valid pairs are {sorted(_VALID)}")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "regime", regime)
        object.__setattr__(self, "support", _regime_support(family, regime))

    def __setattr__(self, *a):  # pragma: no cover
        raise AttributeError("EnsembleSpec is immutable")

    def __repr__(self):
        return f"EnsembleSpec({self.family}, {self.regime})"

    def __eq__(self, o):
        return isinstance(o, EnsembleSpec) and \
            (self.family, self.regime) == (o.family, o.regime)

    def __hash__(self):
        return hash((self.family, self.regime))

    # regime-mapped parameter scalars -------------------------------------

    def ta_pair(self) -> Tuple[ParamScalar, ParamScalar]:
        """(ta1, ta2) with zeros where the exponent is O(1)."""
        zero = ParamScalar.from_rational(0)
        if self.regime == "fixed":
            return zero, zero
        if self.family == "laguerre":
            return scalar("ta1"), zero
        if self.regime == "orderN-one-sided":
            return scalar("ta1"), zero
        return scalar("ta1"), scalar("ta2")

    def alpha_pair(self) -> Tuple[ParamScalar, ParamScalar]:
        """The O(1) exponent parts entering the subleading sources.

        For an O(N) exponent the O(1) part is its offset d_i; for an O(1)
        exponent it is the exponent itself.
        """
        if self.regime == "fixed":
            return scalar("a1"), scalar("a2")
        if self.family == "laguerre":
            if self.regime == "general-linear":
                return scalar("d1"), ParamScalar.from_rational(0)
            return ParamScalar.from_rational(0), ParamScalar.from_rational(0)
        if self.regime == "orderN-one-sided":
            return scalar("d1"), scalar("a2")
        return scalar("d1"), scalar("d2")

    def param_gens(self) -> tuple:
        base = {"r"}
        base |= set(self.support.param_gens())
        for v in (*self.ta_pair(), *self.alpha_pair()):
            base |= set(v.gens)
        return _canon_gens(base)


# ---------------------------------------------------------------------------
# correlator table
# ---------------------------------------------------------------------------

class CorrelatorTable:
    """Mapping (n, l) -> W_n^l for one EnsembleSpec, filled in schedule order."""

    def __init__(self, spec: EnsembleSpec):
        self.spec = spec
        self._data: Dict[Tuple[int, int], AlgebraicFn] = {}

    def __contains__(self, key):
        return tuple(key) in self._data

    def __getitem__(self, key) -> AlgebraicFn:
        key = tuple(key)
        if key not in self._data:
            raise SchedulingError(f"correlator W_{key[0]}^{key[1]} has not been solved")
        return self._data[key]

    def __setitem__(self, key, fn: AlgebraicFn):
        n, l = key
        if n < 1 or l < 0:
            raise StructuralError(f"invalid correlator key {key}")
        if fn.nvars != n:
            raise StructuralError(f"arity {fn.nvars} does not match key {key}")
        self._data[(n, l)] = fn

    def keys(self):
        return sorted(self._data)

    def get(self, n: int, l: int) -> Optional[AlgebraicFn]:
        return self._data.get((n, l))

    def to_records(self) -> List[dict]:
        sup = self.spec.support
        out = []
        for (n, l) in self.keys():
            out.append({
                "family": self.spec.family,
                "regime": self.spec.regime,
                "n": n,
                "l": l,
                "support": {
                    "e": str(sup.e),
                    "p": str(sup.p),
                    "a": str(sup.a) if sup.a is not None else None,
                    "b": str(sup.b) if sup.b is not None else None,
                },
                "scaling": _SCALING_NOTE[self.spec.family],
                "expression": self._data[(n, l)].to_text(),
            })
        return out


_SCALING_NOTE = {
    "gaussian": "eigenvalues scaled by sqrt(2*N*kappa); series parameter 1/(N*sqrt(kappa))",
    "laguerre": "eigenvalues scaled by N*kappa; series parameter 1/(N*sqrt(kappa))",
    "jacobi": "eigenvalues unscaled; series parameter 1/(N*kappa)",
}


# ---------------------------------------------------------------------------
# schedule
# ---------------------------------------------------------------------------

def schedule_keys(l_max: int) -> List[Tuple[int, int]]:
    """Staircase order of (n, l) keys needed for W_1^0..W_1^{l_max}.

    Even target order l seeds the chain at (l/2+1, 0), odd at ((l+1)/2, 1);
    each chain then steps n -> n-1, l -> l+2 until n = 1.
    """
    if l_max < 0:
        raise StructuralError("l_max must be >= 0")
    keys: List[Tuple[int, int]] = []
    seen = set()
    for lt in range(l_max + 1):
        if lt == 0:
            chain = [(1, 0)]
        elif lt % 2 == 1:
            top = (lt + 1) // 2
            chain = [(top - j, 1 + 2 * j) for j in range(top)]
        else:
            top = lt // 2 + 1
            chain = [(top - j, 2 * j) for j in range(top)]
        for key in chain:
            if key not in seen:
                seen.add(key)
                keys.append(key)
    return keys


# ---------------------------------------------------------------------------
# building blocks shared by the per-family equations
# ---------------------------------------------------------------------------

def _one(spec, n):
    return AlgebraicFn.one(n, spec.support)


def _svar(spec, n, i=0):
    return AlgebraicFn.from_string(SPECTRAL_VARS[i], n, spec.support)


def _rat(spec, n, text):
    return AlgebraicFn.from_string(text, n, spec.support)


def _get_relabeled(table_get, key, slots: Sequence[int], n: int,
                   cache: Optional[dict] = None) -> AlgebraicFn:
    """table entry for `key`, with its variables placed at `slots` (0-based)
    inside an n-variable function."""
    ck = (tuple(key), tuple(slots), n)
    if cache is not None and ck in cache:
        return cache[ck]
    fn = table_get(key)
    mapping = {i: s for i, s in enumerate(slots)}
    if not (fn.nvars == n and all(mapping[i] == i for i in mapping)):
        fn = fn.relabel_vars(mapping, n)
    if cache is not None:
        cache[ck] = fn
    return fn


def _product_sum(spec, table_get, n, l, skip_unknown: bool) -> AlgebraicFn:
    """sum over J subset of {s2..sn} and 0 <= k <= l of
    W_{|J|+1}^k(s1, J) * W_{n-|J|}^{l-k}(s1, complement)."""
    total = AlgebraicFn.zero(n, spec.support)
    rest = list(range(1, n))
    cache: dict = {}
    for jsize in range(0, n):
        for J in itertools.combinations(rest, jsize):
            comp = [i for i in rest if i not in J]
            for k in range(0, l + 1):
                key_a = (jsize + 1, k)
                key_b = (n - jsize, l - k)
                if skip_unknown and ((key_a == (n, l)) or (key_b == (n, l))):
                    continue
                A = _get_relabeled(table_get, key_a, [0, *J], n, cache)
                B = _get_relabeled(table_get, key_b, [0, *comp], n, cache)
                total = total + A * B
    return total


def _difference_bracket_sum(spec, table_get, n, l_src, with_inv_s1: bool) -> AlgebraicFn:
    """sum over k=2..n of d/ds_k applied to

        [W_{n-1}(s1,..,s_k dropped,..) - W_{n-1}(s2..s_n)] / (s1 - s_k)
        ( + W_{n-1}(s2..s_n)/s1 when the weight has a hard wall at 0 ).
    """
    total = AlgebraicFn.zero(n, spec.support)
    tail = list(range(1, n))
    W_tail = _get_relabeled(table_get, (n - 1, l_src), tail, n)
    s1 = _svar(spec, n, 0)
    for k in range(1, n):
        slots = [0] + [i for i in tail if i != k]
        W_no_k = _get_relabeled(table_get, (n - 1, l_src), slots, n)
        sk = _svar(spec, n, k)
        bracket = (W_no_k - W_tail) / (s1 - sk)
        if with_inv_s1:
            bracket = bracket + W_tail / s1
        total = total + bracket.differentiate(k)
    return total


def _lift_to_n(fn: AlgebraicFn, n: int) -> AlgebraicFn:
    """Place a one-variable function at slot 0 of an n-variable function."""
    if fn.nvars == n:
        return fn
    return fn.relabel_vars({0: 0}, n)


# ---------------------------------------------------------------------------
# the per-family equation left-hand sides
# ---------------------------------------------------------------------------

def _lhs_gaussian(spec, table_get, n, l, skip_unknown) -> AlgebraicFn:
    sup = spec.support
    h = scalar("h")
    total = AlgebraicFn.zero(n, sup)
    if n == 1 and l == 0:
        total = total + 4
    if l >= 1:
        total = total + table_get((n, l - 1)).differentiate(0) * h
    if not skip_unknown:
        total = total - _svar(spec, n, 0) * 4 * table_get((n, l))
    if n >= 2:
        total = total + _difference_bracket_sum(spec, table_get, n, l, False)
    if l >= 2:
        total = total + table_get((n + 1, l - 2)).diagonal_limit()
    total = total + _product_sum(spec, table_get, n, l, skip_unknown)
    return total


def _lhs_laguerre(spec, table_get, n, l, skip_unknown) -> AlgebraicFn:
    sup = spec.support
    h = scalar("h")
    fixed = spec.regime == "fixed"
    total = AlgebraicFn.zero(n, sup)
    if n == 1 and l == 0:
        total = total + _rat(spec, n, "1/s1")
    if l >= 1:
        prev = table_get((n, l - 1))
        total = total + prev.differentiate(0) * h
        if fixed:
            total = total + prev * scalar("a1") / scalar("r") / _svar(spec, n, 0)
        elif spec.regime == "general-linear":
            total = total + prev * scalar("d1") / scalar("r") / _svar(spec, n, 0)
    if not skip_unknown:
        W = table_get((n, l))
        if fixed:
            total = total - W
        else:
            total = total + W * (_rat(spec, n, "ta1/s1 - 1"))
    if n >= 2:
        total = total + _difference_bracket_sum(spec, table_get, n, l, True)
    if l >= 2:
        total = total + table_get((n + 1, l - 2)).diagonal_limit()
    total = total + _product_sum(spec, table_get, n, l, skip_unknown)
    return total


def _jacobi_alpha_bracket(spec, n) -> AlgebraicFn:
    """A1/s1 - A2/(1-s1) with the regime's O(1) exponent parts."""
    A1, A2 = spec.alpha_pair()
    s1 = _svar(spec, n, 0)
    one = _one(spec, n)
    return AlgebraicFn.from_scalar(A1, n, spec.support) / s1 \
        - AlgebraicFn.from_scalar(A2, n, spec.support) / (one - s1)


def _jacobi_ta_bracket(spec, n) -> AlgebraicFn:
    ta1, ta2 = spec.ta_pair()
    s1 = _svar(spec, n, 0)
    one = _one(spec, n)
    return AlgebraicFn.from_scalar(ta1, n, spec.support) / s1 \
        - AlgebraicFn.from_scalar(ta2, n, spec.support) / (one - s1)


def _lhs_jacobi(spec, table_get, n, l, skip_unknown) -> AlgebraicFn:
    sup = spec.support
    kappa = scalar("kappa")
    if n >= 2 and l >= 1:
        raise CapabilityError(
            f"the multi-point hierarchy at order l={l} is not represented "
            f"for the jacobi family (requested key ({n},{l}))")
    if n == 1:
        total = AlgebraicFn.zero(1, sup)
        ta1, ta2 = spec.ta_pair()
        A1, A2 = spec.alpha_pair()
        inv_ss = _rat(spec, 1, "1/(s1*(1-s1))")
        if l == 0:
            total = total + inv_ss * (ta1 + ta2 + 1)
        elif l == 1:
            total = total + inv_ss * (A1 + A2 + 1 - kappa)
        if l >= 1:
            prev = table_get((1, l - 1))
            total = total + prev.differentiate(0) * (kappa - 1) \
                + prev * _jacobi_alpha_bracket(spec, 1)
        if not skip_unknown:
            total = total + table_get((1, l)) * _jacobi_ta_bracket(spec, 1)
        if l >= 2:
            total = total + table_get((2, l - 2)).diagonal_limit() * kappa
        total = total + _product_sum(spec, table_get, 1, l, skip_unknown)
        return total
    # n >= 2, l = 0
    total = AlgebraicFn.zero(n, sup)
    inv_ss = _rat(spec, n, "1/(s1*(1-s1))")
    tail = list(range(1, n))
    W_tail = _get_relabeled(table_get, (n - 1, 0), tail, n)
    total = total + W_tail * inv_ss * (n - 1)
    sder = AlgebraicFn.zero(n, sup)
    for k in range(1, n):
        sder = sder + W_tail.differentiate(k) * _svar(spec, n, k)
    total = total + sder * inv_ss
    total = total - _difference_bracket_sum(spec, table_get, n, 0, True)
    if not skip_unknown:
        total = total - table_get((n, 0)) * _jacobi_ta_bracket(spec, n)
    total = total - _product_sum(spec, table_get, n, 0, skip_unknown)
    return total


_LHS = {
    "gaussian": _lhs_gaussian,
    "laguerre": _lhs_laguerre,
    "jacobi": _lhs_jacobi,
}


def unknown_coefficient(spec: EnsembleSpec, table: "CorrelatorTable",
                        n: int, l: int) -> AlgebraicFn:
    """Coefficient of the single unknown W_n^l in its (linear) equation."""
    W10 = table[(1, 0)]
    two_w = W10 * 2
    if spec.family == "gaussian":
        C = two_w - _svar(spec, 1, 0) * 4
    elif spec.family == "laguerre":
        if spec.regime == "fixed":
            C = two_w - 1
        else:
            C = two_w + _rat(spec, 1, "ta1/s1 - 1")
    else:
        C = two_w + _jacobi_ta_bracket(spec, 1)
        if n >= 2:
            C = -C
    return C


def _table_getter(table: CorrelatorTable, omit: Optional[Tuple[int, int]] = None):
    def get(key):
        key = tuple(key)
        n, l = key
        if l < 0:
            return AlgebraicFn.zero(max(n, 1), table.spec.support)
        if omit is not None and key == omit:
            raise AssertionError("unknown key requested while omitted")
        return table[key]
    return get


def equation_residual(spec: EnsembleSpec, table: CorrelatorTable,
                      n: int, l: int) -> AlgebraicFn:
    """LHS of the (n, l) loop equation with every term taken from `table`;
    identically zero iff the table solves that equation."""
    if n > ARITY_CAP:
        raise CapabilityError(
            f"{n}-point correlators exceed the arity cap ({ARITY_CAP})")
    get = _table_getter(table)
    return _LHS[spec.family](spec, get, n, l, skip_unknown=False)


# ---------------------------------------------------------------------------
# solving
# ---------------------------------------------------------------------------

def _rational_fn_sqrt(fn: AlgebraicFn) -> Optional[AlgebraicFn]:
    """Exact square root of a purely rational AlgebraicFn, if one exists
    as a rational function (multivariate factorization over Q)."""
    if not fn.is_rational():
        return None
    if fn.is_zero():
        return AlgebraicFn.zero(fn.nvars, fn.support)
    z = (0,) * fn.nvars
    elem = fn.coeffs[z]
    expr = sympy.together(elem.as_expr())
    num, den = sympy.fraction(expr)

    def half(p):
        c, facs = sympy.factor_list(sympy.expand(p))
        c = sympy.Rational(c)
        mag = Fraction(int(c.p), int(c.q))
        if mag < 0:
            return None
        rn = sympy.integer_nthroot(mag.numerator, 2)
        rd = sympy.integer_nthroot(mag.denominator, 2)
        if not (rn[1] and rd[1]):
            return None
        out = sympy.Rational(rn[0], rd[0])
        for base, mult in facs:
            if mult % 2:
                return None
            out *= base ** (mult // 2)
        return out

    rn, rd = half(num), half(den)
    if rn is None or rd is None:
        return None
    root_expr = sympy.cancel(rn / rd)
    fgens = fn.field_gens()
    try:
        root_elem = _field(fgens).from_expr(root_expr)
    except Exception:
        return None
    root = AlgebraicFn(fn.nvars, fn.support, fn.gens, {z: root_elem})
    if root * root != fn:
        return None
    return root


def _leading_quadratic(spec: EnsembleSpec) -> Tuple[AlgebraicFn, AlgebraicFn]:
    """(b, c) of W^2 + b W + c = 0 for the leading resolvent."""
    if spec.family == "gaussian":
        return _rat(spec, 1, "-4*s1"), _rat(spec, 1, "4")
    if spec.family == "laguerre":
        c = _rat(spec, 1, "1/s1")
        if spec.regime == "fixed":
            return _rat(spec, 1, "-1"), c
        return _rat(spec, 1, "ta1/s1 - 1"), c
    ta1, ta2 = spec.ta_pair()
    b = _jacobi_ta_bracket(spec, 1)
    c = _rat(spec, 1, "1/(s1*(1-s1))") * (ta1 + ta2 + 1)
    return b, c


def solve_leading(spec: EnsembleSpec) -> AlgebraicFn:
    """W_1^0: the root of the regime's quadratic decaying like 1/s."""
    b, c = _leading_quadratic(spec)
    disc = b * b - c * 4
    sup = spec.support
    R = _rat(spec, 1, "s1**2") - _svar(spec, 1, 0) * sup.e + sup.p
    t = _rational_fn_sqrt(disc / R)
    if t is None:
        raise ConsistencyError(
            "discriminant of the leading quadratic is not (rational)^2 * R "
            "for the declared support")
    y = AlgebraicFn.y(0, 1, sup)
    for sign in (1, -1):
        W = (t * y * sign - b) / 2
        ser = W.series_at_infinity(1)
        if not ser.has_poly_part() and ser.coeff(1) == 1:
            return W
    raise ConsistencyError("neither branch of the leading quadratic decays like 1/s")


def w2_universal(spec: EnsembleSpec, *, check: bool = True) -> AlgebraicFn:
    """The universal 2-point function on the spec's support:

        [s1 s2 - (e/2)(s1+s2) + p] / (2 (s1-s2)^2 y1 y2)  -  1/(2 (s1-s2)^2)

    verified (by default) against the n=2, l=0 loop equation.
    """
    sup = spec.support
    s1, s2 = _svar(spec, 2, 0), _svar(spec, 2, 1)
    y1, y2 = AlgebraicFn.y(0, 2, sup), AlgebraicFn.y(1, 2, sup)
    num = s1 * s2 - (s1 + s2) * (sup.e / 2) + sup.p
    dd = (s1 - s2) ** 2
    W2 = num / (dd * y1 * y2 * 2) - _one(spec, 2) / (dd * 2)
    if check:
        table = CorrelatorTable(spec)
        table[(1, 0)] = solve_leading(spec)
        table[(2, 0)] = W2
        if not equation_residual(spec, table, 2, 0).is_zero():
            raise ConsistencyError(
                "universal 2-point form does not satisfy the n=2 loop equation")
    return W2


def solve_order(spec: EnsembleSpec, table: CorrelatorTable,
                n: int, l: int) -> AlgebraicFn:
    """Solve the (n, l) equation for its single unknown and return W_n^l."""
    if (n, l) == (1, 0):
        raise StructuralError("the leading order is solved by solve_leading")
    if n > ARITY_CAP:
        raise CapabilityError(
            f"{n}-point correlators exceed the arity cap ({ARITY_CAP}); "
            f"requested key ({n},{l})")
    get = _table_getter(table, omit=(n, l))
    rest = _LHS[spec.family](spec, get, n, l, skip_unknown=True)
    C = unknown_coefficient(spec, table, n, l)
    inv_C = _lift_to_n(invert(C), n)
    return -(rest * inv_C)


def run_schedule(spec: EnsembleSpec, l_max: int) -> CorrelatorTable:
    """Solve the staircase of correlators so W_1^0..W_1^{l_max} are present."""
    table = CorrelatorTable(spec)
    for (n, l) in schedule_keys(l_max):
        if n > ARITY_CAP:
            raise CapabilityError(
                f"l_max={l_max} requires the {n}-point correlator W_{n}^{l}, "
                f"beyond the arity cap ({ARITY_CAP})")
        if spec.family == "jacobi" and n >= 2 and l >= 1:
            raise CapabilityError(
                f"l_max={l_max} requires W_{n}^{l}, outside the represented "
                f"jacobi hierarchy (multi-point equations exist for l=0 only)")
        if (n, l) == (1, 0):
            table[(1, 0)] = solve_leading(spec)
        elif (n, l) == (2, 0):
            table[(2, 0)] = w2_universal(spec, check=False)
        else:
            table[(n, l)] = solve_order(spec, table, n, l)
    return table


# ---------------------------------------------------------------------------
# connected <-> unconnected conversion
# ---------------------------------------------------------------------------

def _set_partitions(items: Tuple[int, ...]):
    """All partitions of `items` into nonempty blocks."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [part[i] + (first,)] + part[i + 1:]
        yield part + [(first,)]


def _norm_subset(s) -> Tuple[int, ...]:
    return tuple(sorted(s))


def connected_from_unconnected(values: Mapping) -> dict:
    """Cumulant-type conversion: given the unconnected averages on every
    nonempty subset of the index set, return the connected ones.

    Keys may be any iterables of indices; the result is keyed by sorted
    tuples.  For each subset S:

        connected(S) = sum over partitions {G_1..G_m} of S of
                       (-1)^(m-1) (m-1)! * prod_j unconnected(G_j)
    """
    vals = {_norm_subset(k): v for k, v in values.items()}
    if not vals:
        raise StructuralError("no subset values given")
    full = max(vals, key=len)
    out = {}
    for size in range(1, len(full) + 1):
        for S in itertools.combinations(full, size):
            total = None
            for part in _set_partitions(S):
                m = len(part)
                term = Fraction((-1) ** (m - 1) * _factorial(m - 1))
                for block in part:
                    b = _norm_subset(block)
                    if b not in vals:
                        raise StructuralError(f"missing unconnected value for subset {b}")
                    term = term * vals[b]
                total = term if total is None else total + term
            out[S] = total
    return out


def unconnected_from_connected(values: Mapping) -> dict:
    """Inverse conversion, by the induction

        unconnected(S) = connected(S)
          + sum over nonempty J subset of S minus its first element of
            connected(S minus J) * unconnected(J).
    """
    vals = {_norm_subset(k): v for k, v in values.items()}
    if not vals:
        raise StructuralError("no subset values given")
    full = max(vals, key=len)
    out = {}
    for size in range(1, len(full) + 1):
        for S in itertools.combinations(full, size):
            if _norm_subset(S) not in vals:
                raise StructuralError(f"missing connected value for subset {S}")
            first, rest = S[0], S[1:]
            total = vals[S]
            for jsize in range(1, len(rest) + 1):
                for J in itertools.combinations(rest, jsize):
                    keep = _norm_subset(set(S) - set(J))
                    total = total + vals[keep] * out[_norm_subset(J)]
            out[S] = total
    return out


def _factorial(k: int) -> int:
    out = 1
    for i in range(2, k + 1):
        out *= i
    return out


# ---------------------------------------------------------------------------
# degeneration checks: jacobi -> laguerre / gaussian
# ---------------------------------------------------------------------------

def _even_power_rewrite(elem, fgens, targets: Mapping[str, "object"], dst_gens):
    """Rewrite an element that is even in each generator named in `targets`
    by substituting gen**2 -> value; raises if any odd power appears.

    `targets` maps generator name -> replacement FracElement (in dst field).
    Remaining generators must exist in dst_gens.
    """
    dst = _field(dst_gens)
    tpos = {fgens.index(g): targets[g] for g in targets if g in fgens}
    keep_pos = {}
    for i, g in enumerate(fgens):
        if g not in targets:
            keep_pos[i] = dst_gens.index(g)

    def conv(poly):
        total = dst.zero
        for monom, coeff in poly.terms():
            term = dst.one * coeff
            for i, e in enumerate(monom):
                if not e:
                    continue
                if i in tpos:
                    if e % 2:
                        raise ConsistencyError(
                            f"odd power of {fgens[i]} where an even function "
                            "was expected")
                    term = term * tpos[i] ** (e // 2)
                else:
                    term = term * dst.gens[keep_pos[i]] ** e
            total = total + term
        return total

    num = conv(elem.numer)
    den = conv(elem.denom)
    if den == 0:
        raise ConsistencyError("substitution annihilated a denominator")
    return num / den


def jacobi_limit_check(direction: str, order: int = 1) -> dict:
    """Verify that the two-sided jacobi solutions degenerate onto the
    laguerre (hard-edge-lifted) or gaussian solutions.

    direction 'to_laguerre': substitute s -> s/ta2 and expand in 1/ta2; the
    coefficient at order zero must be the laguerre resolvent data (with the
    general-linear offset d1 surviving and d2 dropping out).

    direction 'to_gaussian': set ta1 = ta2 = 2/eps^2, substitute
    s -> (1 - eps*s)/2, expand in eps; the order-zero coefficient must be
    the gaussian resolvent data.

    Returns a report dict; report['passed'] is the overall verdict.
    """
    if direction not in ("to_laguerre", "to_gaussian"):
        raise StructuralError(f"unknown direction {direction!r}")
    if order not in (0, 1):
        raise CapabilityError("degeneration checks are provided at orders 0 and 1")
    jac = EnsembleSpec("jacobi", "orderN-two-sided")
    jt = run_schedule(jac, order)
    levels = []
    if direction == "to_laguerre":
        target = EnsembleSpec("laguerre", "general-linear")
        tt = run_schedule(target, order)
        for l in range(order + 1):
            ok, detail = _check_to_laguerre(jac, jt[(1, l)], target, tt[(1, l)], l)
            levels.append({"level": l, "passed": ok, "detail": detail})
    else:
        target = EnsembleSpec("gaussian", "fixed")
        tt = run_schedule(target, order)
        for l in range(order + 1):
            ok, detail = _check_to_gaussian(jac, jt[(1, l)], target, tt[(1, l)], l)
            levels.append({"level": l, "passed": ok, "detail": detail})
    return {
        "direction": direction,
        "order": order,
        "levels": levels,
        "passed": all(lv["passed"] for lv in levels),
    }


def _check_to_laguerre(jac, W_jac, target, W_tgt, level):
    """Compare the 1/ta2-expansion of the rescaled jacobi W_1^level with the
    laguerre general-linear W_1^level.  Exact rational series arithmetic;
    the expansion generator w = 1/ta2 is carried in the spare a2 slot."""
    # work field: s1 + laguerre params + d2 (must drop) + w
    work_gens = ("s1", "r", "a2", "d1", "d2", "g1")
    F = _field(work_gens)
    s1 = F.gens[0]
    w = F.gens[2]
    g1 = F.gens[5]
    ta1 = g1 ** 2 - 1
    # jacobi coefficients are even in g2 (functions of ta2 = 1/w)
    src_gens = W_jac.field_gens()
    targets = {"g2": 1 + 1 / w}
    conv = {}
    for eps, c in W_jac.coeffs.items():
        conv[eps] = _even_power_rewrite(c, src_gens, targets, work_gens)
    # substitute s1 -> w*s1
    sub = {0: w * s1}
    conv = {eps: _subs_gens(c, F, sub) for eps, c in conv.items()}
    # surd: y_jac(w*s1) = w * y_lag(s1) * sqrt(1 + Delta/R_L)
    lag_sup = target.support
    eL = _lift(lag_sup.e.elem, lag_sup.e.gens, work_gens)
    pL = _lift(lag_sup.p.elem, lag_sup.p.gens, work_gens)
    R_L = s1 ** 2 - eL * s1 + pL
    eJ = _even_power_rewrite(jac.support.e.elem, jac.support.e.gens, targets, work_gens)
    pJ = _even_power_rewrite(jac.support.p.elem, jac.support.p.gens, targets, work_gens)
    delta = (eL - eJ / w) * s1 + (pJ / w ** 2 - pL)
    order_hi = 1
    # prefactor: w at level 0; w/sqrt(kappa) at level 1
    r = F.gens[1]
    pref = w if level == 0 else w / r
    rat_ser, surd_ser = _mapped_series(conv, F, pref, w * F.one, delta / R_L,
                                       gpos=2, hi=order_hi)
    return _series_matches_target(rat_ser, surd_ser, W_tgt, work_gens,
                                  forbidden=("d2",), at_order=0)


def _check_to_gaussian(jac, W_jac, target, W_tgt, level):
    """Compare the eps-expansion (ta1 = ta2 = 2/eps^2, s -> (1-eps*s)/2) of
    the rescaled jacobi W_1^level with the gaussian W_1^level.  The
    expansion generator eps is carried in the spare a1 slot."""
    work_gens = ("s1", "r", "a1", "d1", "d2")
    F = _field(work_gens)
    s1, r, eps = F.gens[0], F.gens[1], F.gens[2]
    ta_val = 2 / eps ** 2
    src_gens = W_jac.field_gens()
    targets = {"g1": 1 + ta_val, "g2": 1 + ta_val}
    conv = {}
    for e_, c in W_jac.coeffs.items():
        conv[e_] = _even_power_rewrite(c, src_gens, targets, work_gens)
    sub = {0: (1 - eps * s1) / 2}
    conv = {e_: _subs_gens(c, F, sub) for e_, c in conv.items()}
    R_G = s1 ** 2 - 1
    # R_J((1-eps*s)/2) = (eps^2/4) [R_G + (1 - c(eps))],  c = (4+eps^2)/(2+eps^2)^2
    one_minus_c = (eps ** 4 + 3 * eps ** 2) / (2 + eps ** 2) ** 2
    delta = one_minus_c
    y_scale = -eps / 2
    pref = -eps / 2 if level == 0 else -eps / (2 * r)
    rat_ser, surd_ser = _mapped_series(conv, F, pref, y_scale, delta / R_G,
                                       gpos=2, hi=1)
    return _series_matches_target(rat_ser, surd_ser, W_tgt, work_gens,
                                  forbidden=("d1", "d2"), at_order=0)


def _mapped_series(conv_coeffs, F, pref, y_scale, delta_over_R, gpos, hi):
    """Laurent series in the expansion generator of

        pref * [ c_0 + c_1 * y_scale * y_target * sqrt(1 + delta_over_R) ].

    Returns (rational_series, surd_series); the y_target factor is implied
    on every entry of the surd series.
    """
    sqrt_ser = None
    rat_total: dict = {}
    surd_total: dict = {}
    for eps_key, c in conv_coeffs.items():
        if eps_key[0] == 0:
            ser = _frac_gen_series(c * pref, gpos, F, hi + 4)
            rat_total = _ser_add(rat_total, ser)
        else:
            if sqrt_ser is None:
                u_ser = _frac_gen_series(delta_over_R, gpos, F, hi + 4)
                if u_ser and min(u_ser) <= 0:
                    raise ConsistencyError(
                        "surd mismatch does not vanish with the expansion parameter")
                sqrt_ser = _ser_sqrt1p(u_ser, hi + 4, F.one)
            ser = _frac_gen_series(c * pref * y_scale, gpos, F, hi + 4)
            ser = _ser_mul(ser, sqrt_ser, hi + 4)
            surd_total = _ser_add(surd_total, ser)
    return rat_total, surd_total


def _series_matches_target(rat_ser, surd_ser, W_tgt: AlgebraicFn, work_gens,
                           forbidden: Tuple[str, ...], at_order: int):
    """The expansion must have no terms below `at_order`, its `at_order`
    coefficients must equal the target's sectors, and the coefficients must
    not involve the `forbidden` generators."""
    for ser, tag in ((rat_ser, "rational"), (surd_ser, "surd")):
        for k, v in ser.items():
            if k < at_order and v != 0:
                return False, f"{tag} sector has a term at order {k} below {at_order}"
    tgt_gens = W_tgt.field_gens()
    tgt_rat = W_tgt.coeffs.get((0,))
    tgt_surd = W_tgt.coeffs.get((1,))
    F = _field(work_gens)
    zero = F.zero
    got_rat = rat_ser.get(at_order, zero)
    got_surd = surd_ser.get(at_order, zero)
    want_rat = _lift(tgt_rat, tgt_gens, work_gens) if tgt_rat is not None else zero
    want_surd = _lift(tgt_surd, tgt_gens, work_gens) if tgt_surd is not None else zero
    if got_rat != want_rat:
        return False, "rational sector mismatch at the matched order"
    if got_surd != want_surd:
        return False, "surd sector mismatch at the matched order"
    for g in forbidden:
        gi = work_gens.index(g)
        for v in (got_rat, got_surd):
            for monom, _ in list(v.numer.terms()) + list(v.denom.terms()):
                if monom[gi]:
                    return False, f"parameter {g} survives the degeneration"
    return True, "matched"
