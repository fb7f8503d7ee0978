"""Exact rational-function algebra over quadratic surd extensions.

Every symbolic value in this package is one of two types defined here:

``ParamScalar``
    An exact rational function, over Q, of the formal weight/ensemble
    parameters.  The generator ``r`` stands for sqrt(kappa) (so
    ``kappa = r**2`` and ``h = r - 1/r``), and ``g1``/``g2`` stand for
    sqrt(1 + ta1) / sqrt(1 + ta2), so that the order-N parameters
    ``ta1 = g1**2 - 1``, ``ta2 = g2**2 - 1`` and every endpoint surd the
    classical ensembles produce stay inside one commutative field.

``AlgebraicFn``
    An element

        sum_eps  c_eps(s_1..s_n) * prod_i y_i**eps_i ,    eps in {0,1}^n

    of the extension of the rational functions in the spectral variables by
    surds ``y_i`` satisfying ``y_i**2 = R(s_i) = (s_i - a)(s_i - b)``.  All
    denominators are kept free of the ``y_i`` (conjugate-rationalized), so
    equality is componentwise equality of the 2**n rational coefficients.

The branch convention throughout is ``y ~ +s`` as ``s -> +infinity`` along
the real axis, which makes 1/s-series extraction well defined; continued
along the real axis this gives ``y < 0`` to the left of the support.

No floating point enters any of the symbolic paths; the only float code is
the explicitly numeric evaluation helpers at the bottom.
"""

from __future__ import annotations

import cmath
import re
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Optional, Sequence, Union

import sympy
from sympy import QQ
from sympy.polys.fields import FracField

__all__ = [
    "AlgebraError",
    "StructuralError",
    "DivisionByZeroError",
    "DegenerateElementError",
    "GenuinePoleError",
    "EvaluationError",
    "SeriesTruncationError",
    "CapabilityError",
    "ParamScalar",
    "QuadraticSupport",
    "AlgebraicFn",
    "SeriesAtInfinity",
    "parse_text",
    "add",
    "mul",
    "invert",
    "differentiate",
    "series_at_infinity",
    "diagonal_limit",
    "substitute_params",
    "scalar",
    "scalar_from_string",
    "numeric_env",
]

SPECTRAL_VARS = ("s1", "s2", "s3")
PARAM_NAMES = ("r", "a1", "a2", "d1", "d2", "g1", "g2")
_GEN_RANK = {n: i for i, n in enumerate(SPECTRAL_VARS + PARAM_NAMES)}

# Aliases accepted by the string parser; everything is rewritten onto the
# actual generators.  kappa = r**2, ta_i = g_i**2 - 1.
_PARSE_ALIASES = {
    "alpha1": "a1",
    "alpha2": "a2",
    "delta1": "d1",
    "delta2": "d2",
}


# ---------------------------------------------------------------------------
# errors
# ---------------------------------------------------------------------------

class AlgebraError(Exception):
    """Base class for exact-algebra failures."""


class StructuralError(AlgebraError):
    """Operands disagree on variable lists or supports."""


class DivisionByZeroError(AlgebraError, ZeroDivisionError):
    """Inversion of the zero element."""


class DegenerateElementError(AlgebraError):
    """A + B*y with A**2 - B**2*R identically zero; no inverse in the ring."""


class GenuinePoleError(AlgebraError):
    """A limit that was required to be removable is not."""


class EvaluationError(AlgebraError):
    """A parameter binding hit a denominator zero (or an invalid value)."""


class SeriesTruncationError(AlgebraError):
    """A series was not computed to the order a caller needed."""


class CapabilityError(AlgebraError):
    """The request is outside what this build represents exactly."""


# ---------------------------------------------------------------------------
# fields, lifting, generator substitution
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _field(gens: tuple) -> FracField:
    return FracField(list(gens), QQ)


def _canon_gens(names: Iterable[str]) -> tuple:
    names = set(names)
    for n in names:
        if n not in _GEN_RANK:
            raise StructuralError(f"unknown generator {n!r}")
    return tuple(sorted(names, key=_GEN_RANK.__getitem__))


def _union_gens(a: tuple, b: tuple) -> tuple:
    if a == b:
        return a
    return _canon_gens(set(a) | set(b))


def _remap_poly(poly, dst_field, pos):
    """Re-index a PolyElement onto dst_field; pos[i] = destination slot.

    Two source generators may map to one destination slot (used for the
    s2 -> s1 diagonal substitution); exponents add and coefficients merge.
    """
    acc = {}
    nd = len(dst_field.gens)
    for monom, coeff in poly.terms():
        m = [0] * nd
        for i, e in enumerate(monom):
            if e:
                m[pos[i]] += e
        key = tuple(m)
        if key in acc:
            acc[key] += coeff
        else:
            acc[key] = coeff
    return dst_field.ring.from_dict(acc)


def _lift(elem, src_gens: tuple, dst_gens: tuple):
    """Embed a FracElement of the src field into the dst field by name."""
    if src_gens == dst_gens:
        return elem
    dst = _field(dst_gens)
    pos = [dst_gens.index(g) for g in src_gens]
    num = _remap_poly(elem.numer, dst, pos)
    den = _remap_poly(elem.denom, dst, pos)
    return dst.new(num, den)


def _subs_gens(elem, field, repl):
    """Ring-hom substitution generator -> field element.

    repl maps generator *index* to a FracElement of the same field.
    """
    gens = field.gens

    def ev(poly):
        total = field.zero
        for monom, coeff in poly.terms():
            term = field.one * coeff
            for i, e in enumerate(monom):
                if e:
                    base = repl.get(i)
                    term = term * (base if base is not None else gens[i]) ** e
        # accumulate after full term build (cheaper than in-loop adds of
        # big fractions when many terms share denominators is not worth
        # the bookkeeping; plain summation is fine at our sizes)
            total = total + term
        return total

    num = ev(elem.numer)
    den = ev(elem.denom)
    if den == 0:
        raise EvaluationError("substitution sent a denominator to zero")
    return num / den


# ---------------------------------------------------------------------------
# Laurent-series helpers (dict exponent -> FracElement)
# ---------------------------------------------------------------------------

def _ser_trim(s):
    return {k: v for k, v in s.items() if v != 0}


def _ser_add(a, b):
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, 0) + v
    return _ser_trim(out)


def _ser_mul(a, b, hi):
    out = {}
    for i, u in a.items():
        if u == 0:
            continue
        for j, v in b.items():
            k = i + j
            if k > hi:
                continue
            out[k] = out.get(k, 0) + u * v
    return _ser_trim(out)


def _ser_scale(a, c):
    return _ser_trim({k: v * c for k, v in a.items()})


def _ser_shift(a, d):
    return {k + d: v for k, v in a.items()}


def _ser_inv(a, hi):
    """Invert a Laurent series; leading (lowest-index) coefficient must be
    a nonzero field element."""
    a = _ser_trim(a)
    if not a:
        raise DivisionByZeroError("series inversion of 0")
    v = min(a)
    lead = a[v]
    # normalize to 1 + positive-valuation tail, invert by the standard
    # recurrence b_n = -(sum_{j>=1} t_j b_{n-j}), then shift back
    tail = {k - v: c / lead for k, c in a.items() if k != v}
    one = lead / lead
    b = {0: one}
    for n in range(1, max(hi + v, 0) + 1):
        acc = None
        for j, t in tail.items():
            if j <= n:
                prev = b.get(n - j)
                if prev is not None:
                    term = t * prev
                    acc = term if acc is None else acc + term
        if acc is not None:
            b[n] = -acc
    inv = {k - v: c / lead for k, c in b.items()}
    return _ser_trim({k: c for k, c in inv.items() if k <= hi})


def _ser_div(a, b, hi):
    return _ser_mul(a, _ser_inv(b, hi + max(0, -min(a) if a else 0) + 8), hi)


@lru_cache(maxsize=None)
def _half_binom(k: int) -> Fraction:
    """binomial(1/2, k) as an exact rational."""
    out = Fraction(1)
    half = Fraction(1, 2)
    for j in range(k):
        out *= (half - j) / (j + 1)
    return out


def _ser_sqrt1p(u, hi, one):
    """sqrt(1 + u) for a series u of strictly positive valuation."""
    u = _ser_trim(u)
    if u and min(u) <= 0:
        raise SeriesTruncationError("sqrt(1+u) needs valuation(u) > 0")
    out = {0: one}
    power = {0: one}
    kmax = hi if not u else hi // min(u) + 1
    for k in range(1, kmax + 1):
        power = _ser_mul(power, u, hi)
        if not power:
            break
        c = _half_binom(k)
        out = _ser_add(out, _ser_scale(power, one * c.numerator / c.denominator))
    return out


def _poly_gen_series(poly, gpos, field):
    """Exponent-of-one-generator decomposition of a PolyElement.

    Returns dict exp -> FracElement (in the same field, with that
    generator absent from the coefficient).
    """
    buckets = {}
    for monom, coeff in poly.terms():
        e = monom[gpos]
        m = list(monom)
        m[gpos] = 0
        key = tuple(m)
        d = buckets.setdefault(e, {})
        if key in d:
            d[key] += coeff
        else:
            d[key] = coeff
    ring = field.ring
    return {e: field.new(ring.from_dict(d), ring.one) for e, d in buckets.items()}


def _frac_gen_series(elem, gpos, field, hi):
    """Laurent series of a FracElement in one generator around 0."""
    num = _poly_gen_series(elem.numer, gpos, field)
    den = _poly_gen_series(elem.denom, gpos, field)
    return _ser_div(num, den, hi)


# ---------------------------------------------------------------------------
# ParamScalar
# ---------------------------------------------------------------------------

class ParamScalar:
    """Exact rational function of the formal ensemble parameters.

    Thin immutable wrapper over a sympy ``FracElement`` plus the tuple of
    generator names its field uses.  Arithmetic between scalars from
    different sub-fields lifts both onto the union field by generator name.
    """

    __slots__ = ("gens", "elem")

    def __init__(self, gens: tuple, elem):
        for g in gens:
            if g in SPECTRAL_VARS:
                raise StructuralError("spectral variable in a ParamScalar")
        object.__setattr__(self, "gens", gens)
        object.__setattr__(self, "elem", elem)

    def __setattr__(self, *a):  # pragma: no cover - immutability guard
        raise AttributeError("ParamScalar is immutable")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def from_rational(q) -> "ParamScalar":
        q = Fraction(q)
        F = _field(())
        return ParamScalar((), F.one * QQ(q.numerator, q.denominator))

    # -- plumbing ----------------------------------------------------------

    def _as(self, gens: tuple):
        return _lift(self.elem, self.gens, gens)

    @staticmethod
    def _coerce(x) -> "ParamScalar":
        if isinstance(x, ParamScalar):
            return x
        if isinstance(x, (int, Fraction)):
            return ParamScalar.from_rational(x)
        raise TypeError(f"cannot treat {type(x).__name__} as ParamScalar")

    def _binary(self, other, op):
        other = ParamScalar._coerce(other)
        gens = _union_gens(self.gens, other.gens)
        return ParamScalar(gens, op(self._as(gens), other._as(gens)))

    # -- arithmetic --------------------------------------------------------

    def __add__(self, o):
        return self._binary(o, lambda x, y: x + y)

    __radd__ = __add__

    def __sub__(self, o):
        return self._binary(o, lambda x, y: x - y)

    def __rsub__(self, o):
        return self._binary(o, lambda x, y: y - x)

    def __mul__(self, o):
        return self._binary(o, lambda x, y: x * y)

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = ParamScalar._coerce(o)
        if o.is_zero():
            raise DivisionByZeroError("scalar division by zero")
        return self._binary(o, lambda x, y: x / y)

    def __rtruediv__(self, o):
        return ParamScalar._coerce(o).__truediv__(self)

    def __neg__(self):
        return ParamScalar(self.gens, -self.elem)

    def __pow__(self, k: int):
        return ParamScalar(self.gens, self.elem ** int(k))

    def __eq__(self, o):
        try:
            o = ParamScalar._coerce(o)
        except TypeError:
            return NotImplemented
        gens = _union_gens(self.gens, o.gens)
        return self._as(gens) == o._as(gens)

    def __hash__(self):
        return hash(str(self))

    def is_zero(self) -> bool:
        return self.elem == 0

    # -- substitution / evaluation -----------------------------------------

    def substitute(self, bindings: Mapping[str, "ParamScalar | Fraction | int"]) -> "ParamScalar":
        gens, repl = _binding_plan(self.gens, bindings)
        field = _field(gens)
        out = _subs_gens(_lift(self.elem, self.gens, gens), field,
                         {gens.index(n): v._as(gens) for n, v in repl.items()})
        return ParamScalar(gens, out)._pruned()

    def _pruned(self) -> "ParamScalar":
        """Drop generators that no longer occur (e.g. after substitution)."""
        used = set()
        for poly in (self.elem.numer, self.elem.denom):
            for monom, _ in poly.terms():
                for i, e in enumerate(monom):
                    if e:
                        used.add(self.gens[i])
        kept = _canon_gens(used)
        if kept == self.gens:
            return self
        dst = _field(kept)
        pos = [self.gens.index(g) for g in kept]

        def shrink(poly):
            d = {}
            for monom, coeff in poly.terms():
                d[tuple(monom[p] for p in pos)] = coeff
            return dst.ring.from_dict(d)

        return ParamScalar(kept, dst.new(shrink(self.elem.numer),
                                         shrink(self.elem.denom)))

    def eval_rational(self, bindings: Mapping[str, Union[Fraction, int]]) -> Fraction:
        """Evaluate at exact rational values for every generator used."""
        vals = []
        for g in self.gens:
            if g not in bindings:
                raise EvaluationError(f"missing binding for {g}")
            vals.append(Fraction(bindings[g]))
        num = _eval_poly_rational(self.elem.numer, vals)
        den = _eval_poly_rational(self.elem.denom, vals)
        if den == 0:
            raise EvaluationError(f"denominator of {self} vanishes at {dict(bindings)}")
        return num / den

    def eval_float(self, env: Mapping[str, float]) -> float:
        vals = []
        for g in self.gens:
            if g not in env:
                raise EvaluationError(f"missing numeric value for {g}")
            vals.append(float(env[g]))
        den = _eval_poly_float(self.elem.denom, vals)
        if den == 0.0:
            raise EvaluationError("denominator vanished numerically")
        return _eval_poly_float(self.elem.numer, vals) / den

    # -- display -----------------------------------------------------------

    def as_expr(self):
        return self.elem.as_expr()

    def __str__(self):
        return str(self.elem.as_expr())

    def __repr__(self):
        return f"ParamScalar({self})"


def _eval_poly_rational(poly, vals: Sequence[Fraction]) -> Fraction:
    total = Fraction(0)
    for monom, coeff in poly.terms():
        t = Fraction(int(QQ.numer(coeff)), int(QQ.denom(coeff)))
        for v, e in zip(vals, monom):
            if e:
                t *= v ** e
        total += t
    return total


def _eval_poly_float(poly, vals: Sequence[float]) -> float:
    total = 0.0
    for monom, coeff in poly.terms():
        t = float(QQ.numer(coeff)) / float(QQ.denom(coeff))
        for v, e in zip(vals, monom):
            if e:
                t *= v ** e
        total += t
    return total


def _eval_poly_complex(poly, vals) -> complex:
    total = 0j
    for monom, coeff in poly.terms():
        t = complex(float(QQ.numer(coeff)) / float(QQ.denom(coeff)))
        for v, e in zip(vals, monom):
            if e:
                t *= v ** e
        total += t
    return total


def _binding_plan(gens: tuple, bindings: Mapping) -> tuple:
    """Normalize user bindings onto generator -> ParamScalar replacements.

    Accepts generator names plus the ta1/ta2 and kappa conveniences; a
    rational ta_i binding v is turned into g_i -> sqrt(1+v), which must be
    an exact rational (the degenerations the hierarchy needs are ta -> 0).
    """
    repl = {}
    extra = set()
    for name, val in bindings.items():
        name = _PARSE_ALIASES.get(name, name)
        if name in ("ta1", "ta2"):
            gname = "g1" if name == "ta1" else "g2"
            if isinstance(val, ParamScalar):
                raise CapabilityError(
                    f"{name} can only be bound to an exact rational "
                    "(bind g1/g2 directly for symbolic substitutions)")
            root = _exact_sqrt_fraction(Fraction(val) + 1)
            if root is None:
                raise CapabilityError(
                    f"binding {name}={val} needs sqrt({Fraction(val)+1}) rational")
            repl[gname] = ParamScalar.from_rational(root)
        elif name == "kappa":
            if isinstance(val, ParamScalar):
                raise CapabilityError("bind r directly for symbolic kappa")
            root = _exact_sqrt_fraction(Fraction(val))
            if root is None:
                raise CapabilityError(
                    f"binding kappa={val} needs sqrt({val}) rational; bind r instead")
            repl["r"] = ParamScalar.from_rational(root)
        elif name in PARAM_NAMES:
            repl[name] = val if isinstance(val, ParamScalar) else \
                ParamScalar.from_rational(val)
        else:
            raise StructuralError(f"unknown parameter {name!r}")
    for v in repl.values():
        extra |= set(v.gens)
    out_gens = _canon_gens(set(gens) | extra)
    # replacements only matter for generators actually present
    repl = {n: v for n, v in repl.items() if n in gens}
    return out_gens, repl


def _exact_sqrt_fraction(q: Fraction) -> Optional[Fraction]:
    if q < 0:
        return None
    n, d = q.numerator, q.denominator
    rn = sympy.integer_nthroot(n, 2)
    rd = sympy.integer_nthroot(d, 2)
    if rn[1] and rd[1]:
        return Fraction(rn[0], rd[0])
    return None


def scalar(name_or_value) -> ParamScalar:
    """ParamScalar from a generator name, alias, or exact rational.

    ``scalar("kappa")`` gives r**2; ``scalar("ta1")`` gives g1**2 - 1;
    ``scalar("h")`` gives r - 1/r.
    """
    if isinstance(name_or_value, (int, Fraction)):
        return ParamScalar.from_rational(name_or_value)
    name = _PARSE_ALIASES.get(name_or_value, name_or_value)
    if name == "kappa":
        F = _field(("r",))
        return ParamScalar(("r",), F.gens[0] ** 2)
    if name == "h":
        F = _field(("r",))
        rr = F.gens[0]
        return ParamScalar(("r",), rr - 1 / rr)
    if name == "ta1":
        F = _field(("g1",))
        return ParamScalar(("g1",), F.gens[0] ** 2 - 1)
    if name == "ta2":
        F = _field(("g2",))
        return ParamScalar(("g2",), F.gens[0] ** 2 - 1)
    if name in PARAM_NAMES:
        F = _field((name,))
        return ParamScalar((name,), F.gens[0])
    raise StructuralError(f"unknown parameter {name_or_value!r}")


_FLOAT_TOKEN = re.compile(r"\d+\.\d*|\.\d+|\d+[eE][+-]?\d+")


def scalar_from_string(text: str) -> ParamScalar:
    """Parse an exact scalar expression; floating-point literals are refused."""
    if _FLOAT_TOKEN.search(text.replace(" ", "")):
        raise EvaluationError(f"float literal in exact context: {text!r}")
    names = {}
    for n in PARAM_NAMES:
        names[n] = sympy.Symbol(n)
    for alias, target in _PARSE_ALIASES.items():
        names[alias] = names[target]
    names["kappa"] = names["r"] ** 2
    names["h"] = names["r"] - 1 / names["r"]
    names["ta1"] = names["g1"] ** 2 - 1
    names["ta2"] = names["g2"] ** 2 - 1
    try:
        expr = sympy.parse_expr(text, local_dict=names, evaluate=True)
    except Exception as exc:
        raise EvaluationError(f"cannot parse scalar {text!r}: {exc}") from None
    bad = expr.free_symbols - set(sympy.Symbol(n) for n in PARAM_NAMES)
    if bad:
        raise StructuralError(f"unknown symbols {sorted(map(str, bad))} in {text!r}")
    gens = _canon_gens(str(s) for s in expr.free_symbols)
    if not gens:
        q = sympy.nsimplify(expr, rational=True)
        return ParamScalar.from_rational(Fraction(int(q.p), int(q.q)))
    try:
        elem = _field(gens).from_expr(expr)
    except Exception as exc:
        raise EvaluationError(f"not a rational function: {text!r} ({exc})") from None
    return ParamScalar(gens, elem)


def numeric_env(bindings: Mapping[str, Union[float, Fraction, int]]) -> dict:
    """Map user-level numeric parameter values onto generator floats.

    Accepts kappa/beta, alpha1, alpha2, delta1, delta2, ta1, ta2 (plus raw
    generator names); derives r = sqrt(kappa), g_i = sqrt(1 + ta_i).
    """
    env = {}
    b = dict(bindings)
    if "beta" in b and "kappa" not in b:
        b["kappa"] = float(b.pop("beta")) / 2.0
    for key, val in b.items():
        key = _PARSE_ALIASES.get(key, key)
        val = float(val)
        if key == "kappa":
            if val <= 0:
                raise EvaluationError("kappa must be positive")
            env["r"] = val ** 0.5
        elif key == "ta1":
            env["g1"] = (1.0 + val) ** 0.5
        elif key == "ta2":
            env["g2"] = (1.0 + val) ** 0.5
        elif key in PARAM_NAMES:
            env[key] = val
        else:
            raise StructuralError(f"unknown parameter {key!r}")
    return env


# ---------------------------------------------------------------------------
# QuadraticSupport
# ---------------------------------------------------------------------------

class QuadraticSupport:
    """Support interval (a, b) of the leading density; R(s) = (s-a)(s-b).

    The elementary symmetric data e = a + b and p = a*b is always exact.
    The endpoints themselves are stored when they exist in the parameter
    field; the two-sided Jacobi support stores e, p only (its endpoints are
    roots of an irreducible quadratic over the field) and exposes endpoints
    numerically via :meth:`endpoints_float`.
    """

    __slots__ = ("e", "p", "a", "b", "label")

    def __init__(self, e: ParamScalar, p: ParamScalar,
                 a: Optional[ParamScalar] = None,
                 b: Optional[ParamScalar] = None,
                 label: str = ""):
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "label", label)
        if a is not None and b is not None:
            if a + b != e or a * b != p:
                raise StructuralError("endpoints inconsistent with e, p")

    def __setattr__(self, *a):  # pragma: no cover
        raise AttributeError("QuadraticSupport is immutable")

    @staticmethod
    def from_endpoints(a, b, label: str = "") -> "QuadraticSupport":
        a = ParamScalar._coerce(a)
        b = ParamScalar._coerce(b)
        return QuadraticSupport(a + b, a * b, a, b, label)

    @property
    def has_endpoints(self) -> bool:
        return self.a is not None

    def __eq__(self, o):
        if not isinstance(o, QuadraticSupport):
            return NotImplemented
        return self.e == o.e and self.p == o.p

    def __hash__(self):
        return hash((str(self.e), str(self.p)))

    def __repr__(self):
        if self.has_endpoints:
            return f"QuadraticSupport(a={self.a}, b={self.b})"
        return f"QuadraticSupport(e={self.e}, p={self.p})"

    def param_gens(self) -> tuple:
        return _union_gens(self.e.gens, self.p.gens)

    def R_elem(self, gens: tuple, var_index: int):
        """(s_i - a)(s_i - b) as an element of the field over ``gens``."""
        F = _field(gens)
        s = F.gens[gens.index(SPECTRAL_VARS[var_index])]
        return s * s - _lift(self.e.elem, self.e.gens, gens) * s \
            + _lift(self.p.elem, self.p.gens, gens)

    def substitute(self, bindings) -> "QuadraticSupport":
        a = self.a.substitute(bindings) if self.a is not None else None
        b = self.b.substitute(bindings) if self.b is not None else None
        return QuadraticSupport(self.e.substitute(bindings),
                                self.p.substitute(bindings), a, b, self.label)

    def endpoints_float(self, env: Mapping[str, float]) -> tuple:
        e = self.e.eval_float(env)
        p = self.p.eval_float(env)
        disc = e * e - 4.0 * p
        if disc < 0:
            raise EvaluationError("support endpoints not real at this binding")
        root = disc ** 0.5
        return ((e - root) / 2.0, (e + root) / 2.0)

    def sqrt_R_at(self, point) -> ParamScalar:
        """Exact square root of R(point), when R(point) is a perfect square.

        Returns the canonical (positive-at-reference-parameters) root; the
        caller applies the branch sign.  Raises CapabilityError otherwise.
        """
        point = ParamScalar._coerce(point)
        val = point * point - self.e * point + self.p
        root = _scalar_exact_sqrt(val)
        if root is None:
            raise CapabilityError(
                f"R({point}) = {val} is not a perfect square in the parameter field")
        return root


# reference parameter point (strictly inside the admissible ranges, g > 1)
# used only to pick the sign of an exact square root
_SIGN_REFERENCE = {"r": Fraction(2), "a1": Fraction(3), "a2": Fraction(5),
                   "d1": Fraction(7), "d2": Fraction(11),
                   "g1": Fraction(3), "g2": Fraction(4)}


def _scalar_exact_sqrt(v: ParamScalar) -> Optional[ParamScalar]:
    """Square root of a ParamScalar inside the parameter field, or None.

    Works by factoring numerator and denominator over Q and halving every
    multiplicity; the sign is normalized to be positive at a reference
    parameter point with all alphas/deltas positive and g_i > 1.
    """
    if v.is_zero():
        return ParamScalar.from_rational(0)
    expr = sympy.together(v.as_expr())
    num, den = sympy.fraction(expr)

    def half(p):
        c, facs = sympy.factor_list(sympy.expand(p))
        rc = _exact_sqrt_fraction(Fraction(int(c.p), int(c.q)))
        if rc is None:
            return None
        out = sympy.Rational(rc.numerator, rc.denominator)
        for base, mult in facs:
            if mult % 2:
                return None
            out *= base ** (mult // 2)
        return out

    rn, rd = half(num), half(den)
    if rn is None or rd is None:
        return None
    cand = sympy.cancel(rn / rd)
    syms = _canon_gens(str(s) for s in cand.free_symbols) if cand.free_symbols else ()
    if syms:
        out = ParamScalar(syms, _field(syms).from_expr(cand))
    else:
        q = sympy.nsimplify(cand, rational=True)
        out = ParamScalar.from_rational(Fraction(int(q.p), int(q.q)))
    if out * out != v:
        return None
    try:
        if out.eval_rational(_SIGN_REFERENCE) < 0:
            out = -out
    except EvaluationError:
        pass  # reference hit a pole/zero; keep the factorization sign
    return out


# ---------------------------------------------------------------------------
# AlgebraicFn
# ---------------------------------------------------------------------------

class AlgebraicFn:
    """sum over eps in {0,1}^n of  c_eps(s_vec) * prod_i y_i^eps_i."""

    __slots__ = ("nvars", "support", "gens", "coeffs")

    def __init__(self, nvars: int, support: QuadraticSupport,
                 gens: tuple, coeffs: dict):
        if not 1 <= nvars <= len(SPECTRAL_VARS):
            raise StructuralError(f"nvars={nvars} outside supported arity")
        object.__setattr__(self, "nvars", nvars)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "gens", gens)
        object.__setattr__(self, "coeffs", {
            e: c for e, c in coeffs.items() if c != 0})

    def __setattr__(self, *a):  # pragma: no cover
        raise AttributeError("AlgebraicFn is immutable")

    # -- field plumbing ----------------------------------------------------

    def field_gens(self) -> tuple:
        return SPECTRAL_VARS[:self.nvars] + self.gens

    def field(self) -> FracField:
        return _field(self.field_gens())

    @staticmethod
    def _zero_eps(n):
        return (0,) * n

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zero(nvars: int, support: QuadraticSupport) -> "AlgebraicFn":
        return AlgebraicFn(nvars, support, support.param_gens(), {})

    @staticmethod
    def one(nvars: int, support: QuadraticSupport) -> "AlgebraicFn":
        gens = support.param_gens()
        F = _field(SPECTRAL_VARS[:nvars] + gens)
        return AlgebraicFn(nvars, support, gens,
                           {AlgebraicFn._zero_eps(nvars): F.one})

    @staticmethod
    def from_scalar(c: ParamScalar, nvars: int, support: QuadraticSupport) -> "AlgebraicFn":
        gens = _union_gens(support.param_gens(), c.gens)
        fgens = SPECTRAL_VARS[:nvars] + gens
        return AlgebraicFn(nvars, support, gens,
                           {AlgebraicFn._zero_eps(nvars): _lift(c.elem, c.gens, fgens)})

    @staticmethod
    def from_string(text: str, nvars: int, support: QuadraticSupport) -> "AlgebraicFn":
        """Purely rational function of s1..sn and the parameters.

        Surd components are built with :meth:`y` and arithmetic.
        """
        if _FLOAT_TOKEN.search(text.replace(" ", "")):
            raise EvaluationError(f"float literal in exact context: {text!r}")
        names = {n: sympy.Symbol(n) for n in PARAM_NAMES}
        for alias, target in _PARSE_ALIASES.items():
            names[alias] = names[target]
        names["kappa"] = names["r"] ** 2
        names["h"] = names["r"] - 1 / names["r"]
        names["ta1"] = names["g1"] ** 2 - 1
        names["ta2"] = names["g2"] ** 2 - 1
        for v in SPECTRAL_VARS[:nvars]:
            names[v] = sympy.Symbol(v)
        try:
            expr = sympy.parse_expr(text, local_dict=names, evaluate=True)
        except Exception as exc:
            raise EvaluationError(f"cannot parse {text!r}: {exc}") from None
        sym_names = {str(s) for s in expr.free_symbols}
        bad = sym_names - set(PARAM_NAMES) - set(SPECTRAL_VARS[:nvars])
        if bad:
            raise StructuralError(f"unknown symbols {sorted(bad)} in {text!r}")
        gens = _canon_gens((sym_names | set(support.param_gens())) - set(SPECTRAL_VARS))
        fgens = SPECTRAL_VARS[:nvars] + gens
        elem = _field(fgens).from_expr(expr)
        return AlgebraicFn(nvars, support, gens,
                           {AlgebraicFn._zero_eps(nvars): elem})

    @staticmethod
    def y(i: int, nvars: int, support: QuadraticSupport) -> "AlgebraicFn":
        """The adjoined surd y_i, i zero-based."""
        if not 0 <= i < nvars:
            raise StructuralError(f"y index {i} outside arity {nvars}")
        gens = support.param_gens()
        F = _field(SPECTRAL_VARS[:nvars] + gens)
        eps = [0] * nvars
        eps[i] = 1
        return AlgebraicFn(nvars, support, gens, {tuple(eps): F.one})

    # -- alignment ---------------------------------------------------------

    def _with_gens(self, gens: tuple) -> "AlgebraicFn":
        if gens == self.gens:
            return self
        src = self.field_gens()
        dst = SPECTRAL_VARS[:self.nvars] + gens
        return AlgebraicFn(self.nvars, self.support, gens,
                           {e: _lift(c, src, dst) for e, c in self.coeffs.items()})

    @staticmethod
    def _align(f: "AlgebraicFn", g: "AlgebraicFn"):
        if f.nvars != g.nvars:
            raise StructuralError(
                f"arity mismatch: {f.nvars} vs {g.nvars} variables")
        if f.support != g.support:
            raise StructuralError("operands live over different supports")
        gens = _union_gens(f.gens, g.gens)
        return f._with_gens(gens), g._with_gens(gens)

    @staticmethod
    def _coerce_operand(x, template: "AlgebraicFn"):
        if isinstance(x, AlgebraicFn):
            return x
        if isinstance(x, (int, Fraction)):
            return AlgebraicFn.from_scalar(ParamScalar.from_rational(x),
                                           template.nvars, template.support)
        if isinstance(x, ParamScalar):
            return AlgebraicFn.from_scalar(x, template.nvars, template.support)
        raise TypeError(f"cannot treat {type(x).__name__} as AlgebraicFn")

    # -- ring operations ----------------------------------------------------

    def __add__(self, other):
        other = AlgebraicFn._coerce_operand(other, self)
        f, g = AlgebraicFn._align(self, other)
        out = dict(f.coeffs)
        for e, c in g.coeffs.items():
            out[e] = out.get(e, 0) + c
        return AlgebraicFn(f.nvars, f.support, f.gens, out)

    __radd__ = __add__

    def __neg__(self):
        return AlgebraicFn(self.nvars, self.support, self.gens,
                           {e: -c for e, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-AlgebraicFn._coerce_operand(other, self))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = AlgebraicFn._coerce_operand(other, self)
        f, g = AlgebraicFn._align(self, other)
        fgens = f.field_gens()
        R = [f.support.R_elem(fgens, i) for i in range(f.nvars)]
        out = {}
        for e1, c1 in f.coeffs.items():
            for e2, c2 in g.coeffs.items():
                c = c1 * c2
                eps = tuple(a ^ b for a, b in zip(e1, e2))
                for i in range(f.nvars):
                    if e1[i] and e2[i]:
                        c = c * R[i]
                out[eps] = out.get(eps, 0) + c
        return AlgebraicFn(f.nvars, f.support, f.gens, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = AlgebraicFn._coerce_operand(other, self)
        return self * invert_any(other)

    def __pow__(self, k: int):
        k = int(k)
        if k < 0:
            return invert_any(self) ** (-k)
        out = AlgebraicFn.one(self.nvars, self.support)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base if k > 1 else base
            k >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, (int, Fraction, ParamScalar)):
            other = AlgebraicFn._coerce_operand(other, self)
        if not isinstance(other, AlgebraicFn):
            return NotImplemented
        if self.nvars != other.nvars or self.support != other.support:
            return False
        f, g = AlgebraicFn._align(self, other)
        return f.coeffs == g.coeffs

    def __hash__(self):  # pragma: no cover - not used as dict key
        return hash((self.nvars, len(self.coeffs)))

    def is_zero(self) -> bool:
        return not self.coeffs

    def is_rational(self) -> bool:
        """True when no surd component is present."""
        z = AlgebraicFn._zero_eps(self.nvars)
        return all(e == z for e in self.coeffs)

    # -- calculus ----------------------------------------------------------

    def differentiate(self, var: int = 0) -> "AlgebraicFn":
        """Partial derivative in s_{var+1}; d y_i/d s_i = R'(s_i)/(2 y_i)."""
        if not 0 <= var < self.nvars:
            raise StructuralError(f"variable index {var} outside arity {self.nvars}")
        fgens = self.field_gens()
        F = _field(fgens)
        s = F.gens[var]
        R = self.support.R_elem(fgens, var)
        e_lift = _lift(self.support.e.elem, self.support.e.gens, fgens)
        Rprime = 2 * s - e_lift
        out = {}
        for eps, c in self.coeffs.items():
            d = c.diff(s)
            if eps[var]:
                d = d + c * Rprime / (2 * R)
            out[eps] = out.get(eps, 0) + d
        return AlgebraicFn(self.nvars, self.support, self.gens, out)

    # -- substitution ------------------------------------------------------

    def substitute_params(self, bindings: Mapping) -> "AlgebraicFn":
        new_support = self.support.substitute(bindings)
        scal_gens, repl = _binding_plan(self.gens, bindings)
        gens = _canon_gens(set(scal_gens) | set(new_support.param_gens()))
        fgens = SPECTRAL_VARS[:self.nvars] + gens
        F = _field(fgens)
        repl_idx = {fgens.index(n): _lift(v.elem, v.gens, fgens)
                    for n, v in repl.items()}
        out = {}
        for eps, c in self.coeffs.items():
            lifted = _lift(c, self.field_gens(), fgens)
            out[eps] = _subs_gens(lifted, F, repl_idx) if repl_idx else lifted
        # prune generators that the substitution eliminated everywhere
        used = set(new_support.param_gens())
        for c in out.values():
            for poly in (c.numer, c.denom):
                for monom, _ in poly.terms():
                    for i, e in enumerate(monom):
                        if e and fgens[i] not in SPECTRAL_VARS:
                            used.add(fgens[i])
        kept = _canon_gens(used)
        if kept != gens:
            kept_f = SPECTRAL_VARS[:self.nvars] + kept
            dst = _field(kept_f)
            pos = [fgens.index(g) for g in kept_f]

            def shrink(poly):
                return dst.ring.from_dict(
                    {tuple(m[p] for p in pos): c for m, c in poly.terms()})

            out = {eps: dst.new(shrink(c.numer), shrink(c.denom))
                   for eps, c in out.items()}
            gens = kept
        return AlgebraicFn(self.nvars, new_support, gens, out)

    def relabel_vars(self, mapping: Mapping[int, int], new_nvars: int) -> "AlgebraicFn":
        """Move variable i (0-based) to slot mapping[i] in an arity-new_nvars
        function; unmentioned slots are fresh variables the function does
        not depend on.  Injective mappings only."""
        if len(set(mapping.values())) != len(mapping):
            raise StructuralError("relabeling must be injective")
        src = self.field_gens()
        dst = SPECTRAL_VARS[:new_nvars] + self.gens
        Fd = _field(dst)
        pos = []
        for i, name in enumerate(src):
            if name in SPECTRAL_VARS:
                vi = SPECTRAL_VARS.index(name)
                if vi not in mapping:
                    raise StructuralError(f"no destination for variable {name}")
                pos.append(dst.index(SPECTRAL_VARS[mapping[vi]]))
            else:
                pos.append(dst.index(name))
        out = {}
        for eps, c in self.coeffs.items():
            neweps = [0] * new_nvars
            for i, bit in enumerate(eps):
                if bit:
                    neweps[mapping[i]] = 1
            num = _remap_poly(c.numer, Fd, pos)
            den = _remap_poly(c.denom, Fd, pos)
            key = tuple(neweps)
            val = Fd.new(num, den)
            out[key] = out.get(key, 0) + val
        return AlgebraicFn(new_nvars, self.support, self.gens, out)

    # -- series ------------------------------------------------------------

    def series_at_infinity(self, order: int) -> "SeriesAtInfinity":
        """Laurent data at s = +infinity under the branch y ~ +s (n = 1)."""
        if self.nvars != 1:
            raise StructuralError("series_at_infinity needs a one-variable function")
        if order < 0:
            raise StructuralError("order must be >= 0")
        pgens = self.gens
        PF = _field(pgens) if pgens else _field(())
        one = PF.one
        hi = order
        # sigma = 1/s; rational part N(s)/D(s) -> Laurent in sigma
        total = {}
        ser_y = None
        for eps, c in self.coeffs.items():
            num = _sigma_series_of_poly(c.numer, self.field_gens(), pgens)
            den = _sigma_series_of_poly(c.denom, self.field_gens(), pgens)
            piece_hi = hi + 1  # y contributes sigma^{-1}
            ser = _ser_div(num, den, piece_hi)
            if eps[0]:
                if ser_y is None:
                    e_l = _lift(self.support.e.elem, self.support.e.gens, pgens)
                    p_l = _lift(self.support.p.elem, self.support.p.gens, pgens)
                    u = {1: -e_l * one, 2: p_l * one}
                    ser_y = _ser_shift(_ser_sqrt1p(u, hi + 2, one), -1)
                ser = _ser_mul(ser, ser_y, hi)
            total = _ser_add(total, {k: v for k, v in ser.items() if k <= hi})
        poly_part = {}
        tail = []
        for k, v in total.items():
            if k <= 0:
                poly_part[-k] = ParamScalar(pgens, v)
        for j in range(1, order + 1):
            tail.append(ParamScalar(pgens, total.get(j, PF.zero)))
        return SeriesAtInfinity(poly_part, tail)

    def series_at_zero(self, order: int) -> list:
        """Taylor coefficients [s^0..s^order] at s = 0 (n = 1).

        Requires 0 strictly outside the support (the branch there is
        y(0) = -sqrt(R(0)), continued from y ~ +s at +infinity along the
        real axis left of the support).
        """
        if self.nvars != 1:
            raise StructuralError("series_at_zero needs a one-variable function")
        pgens = self.gens
        PF = _field(pgens) if pgens else _field(())
        one = PF.one
        root0 = self.support.sqrt_R_at(0)
        if root0.is_zero():
            raise GenuinePoleError("support touches 0; no Taylor series there")
        hi = order
        pieces = []
        vmax = 0
        for eps, c in self.coeffs.items():
            num = _zero_series_of_poly(c.numer, self.field_gens(), pgens)
            den = _zero_series_of_poly(c.denom, self.field_gens(), pgens)
            if eps[0] and num:
                # a coefficient fraction with an s-pole shifts indices down;
                # the surd series must reach that much further
                vmax = max(vmax, min(den) - min(num))
            pieces.append((eps, num, den))
        total = {}
        ser_y = None
        for eps, num, den in pieces:
            ser = _ser_div(num, den, hi)
            if eps[0]:
                if ser_y is None:
                    e_l = _lift(self.support.e.elem, self.support.e.gens, pgens)
                    p_l = _lift(self.support.p.elem, self.support.p.gens, pgens)
                    r_l = _lift(root0.elem, root0.gens, pgens)
                    u = {1: -e_l / p_l * one, 2: one / p_l}
                    ser_y = _ser_scale(_ser_sqrt1p(u, hi + vmax, one), -r_l * one)
                ser = _ser_mul(ser, ser_y, hi)
            total = _ser_add(total, ser)
        if total and min(total) < 0:
            raise GenuinePoleError("function has a pole at s = 0")
        return [ParamScalar(pgens, total.get(j, PF.zero)) for j in range(order + 1)]

    # -- diagonal limit ----------------------------------------------------

    def diagonal_limit(self) -> "AlgebraicFn":
        """lim s2 -> s1, merging the first two variables.

        Computed as an exact Laurent expansion in eps = s2 - s1; all negative
        powers must cancel or GenuinePoleError is raised.
        """
        if self.nvars < 2:
            raise StructuralError("diagonal_limit needs at least two variables")
        n = self.nvars
        fgens = self.field_gens()
        F = _field(fgens)
        s2_ring_gen = F.ring.gens[fgens.index("s2")]
        # destination: same field with s2 fused into s1 (coefficients of the
        # eps-series do not involve s2)
        fuse_pos = [fgens.index("s1") if g == "s2" else fgens.index(g)
                    for g in fgens]

        def taylor(poly, jmax):
            """coefficients of (s2 - s1)^j for P(s1, s2, ...), j <= jmax"""
            out = []
            cur = poly
            fact = 1
            for j in range(jmax + 1):
                sub = _remap_poly(cur, F, fuse_pos)
                out.append(F.new(sub, F.ring.one) / fact)
                cur = cur.diff(s2_ring_gen)
                fact *= (j + 1)
                if not cur and j + 1 <= jmax:
                    out.extend([F.zero] * (jmax - j))
                    break
            return {j: c for j, c in enumerate(out) if c != 0}

        def vanish_order(poly):
            cur = poly
            j = 0
            while cur:
                if _remap_poly(cur, F, fuse_pos):
                    return j
                cur = cur.diff(s2_ring_gen)
                j += 1
            return 0

        depth = 0
        for eps, c in self.coeffs.items():
            depth = max(depth, vanish_order(c.denom))
        hi = depth + 1

        R1 = self.support.R_elem(fgens, 0)
        e_l = _lift(self.support.e.elem, self.support.e.gens, fgens)
        s1g = F.gens[fgens.index("s1")]
        # y2 = y1 * sqrt(1 + u), u = ((2 s1 - e) eps + eps^2)/R(s1)
        u = {1: (2 * s1g - e_l) / R1, 2: 1 / R1}
        sqrt_ser = _ser_sqrt1p(u, hi, F.one)

        acc = {}
        for eps, c in self.coeffs.items():
            vd = vanish_order(c.denom)
            num = taylor(c.numer, hi + vd)
            den = taylor(c.denom, hi + vd)
            ser = _ser_div(num, den, hi)
            extra = None
            if eps[1]:
                ser = _ser_mul(ser, sqrt_ser, hi)
            new_first = eps[0] ^ eps[1]
            if eps[0] and eps[1]:
                ser = {k: v * R1 for k, v in ser.items()}
            key = (new_first,) + eps[2:]
            acc[key] = _ser_add(acc.get(key, {}), ser)

        out = {}
        new_gens_full = SPECTRAL_VARS[:n - 1] + self.gens
        Fd = _field(new_gens_full)
        # s1 stays, s2 is gone (coefficients of the eps-series are s2-free,
        # so its slot maps anywhere harmlessly), s_j -> s_{j-1} for j >= 3
        shift_pos = []
        for g in fgens:
            if g == "s1" or g == "s2":
                shift_pos.append(new_gens_full.index("s1"))
            elif g in SPECTRAL_VARS:
                k = SPECTRAL_VARS.index(g)
                shift_pos.append(new_gens_full.index(SPECTRAL_VARS[k - 1]))
            else:
                shift_pos.append(new_gens_full.index(g))
        for key, ser in acc.items():
            for j, v in ser.items():
                if j < 0 and v != 0:
                    raise GenuinePoleError(
                        f"non-removable pole of order {-j} on the diagonal")
            v0 = ser.get(0)
            if v0 is None or v0 == 0:
                continue
            out[key] = Fd.new(_remap_poly(v0.numer, Fd, shift_pos),
                              _remap_poly(v0.denom, Fd, shift_pos))
        return AlgebraicFn(n - 1, self.support, self.gens, out)

    # -- numeric evaluation -------------------------------------------------

    def eval_complex(self, points: Sequence[complex], env: Mapping[str, float]) -> complex:
        """Evaluate at complex spectral points (off the support) with float
        parameter values; the surd uses the resolvent branch."""
        if len(points) != self.nvars:
            raise StructuralError("wrong number of spectral points")
        fgens = self.field_gens()
        vals = []
        a_f, b_f = self.support.endpoints_float(env)
        for g in fgens:
            if g in SPECTRAL_VARS:
                vals.append(complex(points[SPECTRAL_VARS.index(g)]))
            else:
                if g not in env:
                    raise EvaluationError(f"missing numeric value for {g}")
                vals.append(complex(env[g]))
        ys = []
        for i in range(self.nvars):
            s = complex(points[i])
            if s == a_f or s == b_f:
                raise EvaluationError("evaluation point coincides with a support endpoint")
            ys.append(cmath.exp(0.5 * (cmath.log(s - a_f) + cmath.log(s - b_f))))
        total = 0j
        for eps, c in self.coeffs.items():
            den = _eval_poly_complex(c.denom, vals)
            if den == 0:
                raise EvaluationError("denominator vanished at evaluation point")
            t = _eval_poly_complex(c.numer, vals) / den
            for i, bit in enumerate(eps):
                if bit:
                    t *= ys[i]
            total += t
        return total

    # -- text form -----------------------------------------------------------

    def to_text(self) -> str:
        lines = [f"vars: {','.join(SPECTRAL_VARS[:self.nvars])}"]
        sup = self.support
        lines.append(f"support.e = {sup.e}")
        lines.append(f"support.p = {sup.p}")
        lines.append(f"support.a = {sup.a if sup.a is not None else 'none'}")
        lines.append(f"support.b = {sup.b if sup.b is not None else 'none'}")
        for eps in sorted(self.coeffs):
            tag = "".join(str(b) for b in eps)
            lines.append(f"coeff[{tag}] = {self.coeffs[eps].as_expr()}")
        return "\n".join(lines) + "\n"

    def __str__(self):
        return self.to_text()

    def __repr__(self):
        return f"AlgebraicFn(n={self.nvars}, components={len(self.coeffs)})"


def parse_text(text: str) -> AlgebraicFn:
    """Inverse of :meth:`AlgebraicFn.to_text` (exact round-trip)."""
    vars_m = re.search(r"^vars:\s*(.+)$", text, re.M)
    if not vars_m:
        raise EvaluationError("missing 'vars:' line")
    nvars = len([v for v in vars_m.group(1).split(",") if v.strip()])

    def grab(name):
        m = re.search(rf"^support\.{name} = (.+)$", text, re.M)
        if not m:
            raise EvaluationError(f"missing support.{name}")
        s = m.group(1).strip()
        return None if s == "none" else scalar_from_string(s)

    e, p, a, b = grab("e"), grab("p"), grab("a"), grab("b")
    support = QuadraticSupport(e, p, a, b)
    fn = AlgebraicFn.zero(nvars, support)
    for m in re.finditer(r"^coeff\[([01]+)\] = (.+)$", text, re.M):
        eps = tuple(int(ch) for ch in m.group(1))
        if len(eps) != nvars:
            raise EvaluationError("coefficient arity disagrees with vars line")
        piece = AlgebraicFn.from_string(m.group(2), nvars, support)
        for i, bit in enumerate(eps):
            if bit:
                piece = piece * AlgebraicFn.y(i, nvars, support)
        fn = fn + piece
    return fn


def _sigma_series_of_poly(poly, fgens, pgens):
    """P(s) as a Laurent series in sigma = 1/s: {-deg_i: coeff_i}."""
    spos = fgens.index("s1")
    PF = _field(pgens) if pgens else _field(())
    buckets = {}
    for monom, coeff in poly.terms():
        e = monom[spos]
        m = list(monom)
        m[spos] = 0
        key = tuple(m[i] for i, g in enumerate(fgens) if g != "s1")
        d = buckets.setdefault(-e, {})
        d[key] = d.get(key, 0) + coeff
    return {e: PF.new(PF.ring.from_dict(d), PF.ring.one) for e, d in buckets.items()}


def _zero_series_of_poly(poly, fgens, pgens):
    spos = fgens.index("s1")
    PF = _field(pgens) if pgens else _field(())
    buckets = {}
    for monom, coeff in poly.terms():
        e = monom[spos]
        m = list(monom)
        m[spos] = 0
        key = tuple(m[i] for i, g in enumerate(fgens) if g != "s1")
        d = buckets.setdefault(e, {})
        d[key] = d.get(key, 0) + coeff
    return {e: PF.new(PF.ring.from_dict(d), PF.ring.one) for e, d in buckets.items()}


class SeriesAtInfinity:
    """Polynomial part (s^j, j >= 0) plus 1/s-tail of a Laurent expansion."""

    __slots__ = ("poly_part", "tail")

    def __init__(self, poly_part: dict, tail: list):
        self.poly_part = {k: v for k, v in poly_part.items() if not v.is_zero()}
        self.tail = tail

    def coeff(self, k: int) -> ParamScalar:
        """Coefficient of s^(-k), k >= 1."""
        if not 1 <= k <= len(self.tail):
            raise SeriesTruncationError(
                f"series computed to 1/s^{len(self.tail)}, asked for 1/s^{k}")
        return self.tail[k - 1]

    def has_poly_part(self) -> bool:
        return bool(self.poly_part)


# ---------------------------------------------------------------------------
# free-function forms of the operations
# ---------------------------------------------------------------------------

def add(f: AlgebraicFn, g: AlgebraicFn) -> AlgebraicFn:
    return f + g


def mul(f: AlgebraicFn, g: AlgebraicFn) -> AlgebraicFn:
    return f * g


def invert(f: AlgebraicFn) -> AlgebraicFn:
    """(A + B y)^(-1) = (A - B y)/(A^2 - B^2 R), one spectral variable."""
    if f.nvars != 1:
        raise StructuralError("invert is defined for one-variable functions")
    if f.is_zero():
        raise DivisionByZeroError("inverting the zero function")
    fgens = f.field_gens()
    A = f.coeffs.get((0,), _field(fgens).zero)
    B = f.coeffs.get((1,), _field(fgens).zero)
    R = f.support.R_elem(fgens, 0)
    D = A * A - B * B * R
    if D == 0:
        raise DegenerateElementError("A^2 - B^2 R vanishes identically")
    return AlgebraicFn(1, f.support, f.gens, {(0,): A / D, (1,): -B / D})


def invert_any(f: AlgebraicFn) -> AlgebraicFn:
    """Inversion helper for multi-variable divisors of a single surd sector
    c * prod y_i^eps_i (all the hierarchy needs): the inverse keeps the same
    sector, with coefficient divided by prod R(s_i) over the set bits."""
    if f.nvars == 1:
        return invert(f)
    if f.is_zero():
        raise DivisionByZeroError("inverting the zero function")
    if len(f.coeffs) != 1:
        raise StructuralError(
            "multi-variable inversion is only provided for single-sector elements")
    (eps, c), = f.coeffs.items()
    fgens = f.field_gens()
    denom = c
    for i, bit in enumerate(eps):
        if bit:
            denom = denom * f.support.R_elem(fgens, i)
    return AlgebraicFn(f.nvars, f.support, f.gens, {eps: 1 / denom})


def differentiate(f: AlgebraicFn, var: int = 0) -> AlgebraicFn:
    return f.differentiate(var)


def series_at_infinity(f: AlgebraicFn, order: int) -> SeriesAtInfinity:
    return f.series_at_infinity(order)


def diagonal_limit(f: AlgebraicFn) -> AlgebraicFn:
    return f.diagonal_limit()


def substitute_params(f: AlgebraicFn, bindings: Mapping) -> AlgebraicFn:
    return f.substitute_params(bindings)
