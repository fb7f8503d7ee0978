"""Tests for moment extraction and the classical closed forms."""

from fractions import Fraction

import pytest
import sympy
from hypothesis import given, settings, strategies as st
from sympy import Rational, binomial, cancel

from betaloop.algebra import (
    CapabilityError,
    EvaluationError,
    SeriesTruncationError,
    StructuralError,
    scalar,
)
from betaloop.loop_solver import ConsistencyError, EnsembleSpec, run_schedule
from betaloop import moments as mo
from betaloop.moments import (
    ALPHA1,
    ALPHA2,
    KAPPA,
    N,
    TA1,
    a1_fixed,
    a1_orderN,
    catalan,
    circular_M,
    denominator_zero_report,
    exact_moment_record,
    expand_moments,
    expand_negative_moments,
    gegenbauer,
    jacobi_exact_m1,
    jacobi_exact_m3,
    jacobi_moment_symmetry_check,
    laguerre_moment_symmetry_check,
    moment_csv_rows,
    narayana_moment,
    negative_moment,
    resolvent_kappa_inversion_check,
    substituted_expansion_check,
    to_parameter_expr,
)


@pytest.fixture(scope="module")
def tables():
    return {
        ("laguerre", "fixed"): run_schedule(EnsembleSpec("laguerre"), 3),
        ("laguerre", "orderN-one-sided"): run_schedule(
            EnsembleSpec("laguerre", "orderN-one-sided"), 1),
        ("jacobi", "fixed"): run_schedule(EnsembleSpec("jacobi"), 2),
        ("gaussian", "fixed"): run_schedule(EnsembleSpec("gaussian"), 2),
    }


def _zero(e) -> bool:
    return cancel(e) == 0


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

class TestClosedForms:
    def test_catalan(self):
        assert [catalan(k) for k in range(7)] == [1, 1, 2, 5, 14, 42, 132]
        assert catalan(3) == 5
        with pytest.raises(StructuralError):
            catalan(-1)

    def test_narayana_pinned_value(self):
        # the k = 2 Narayana polynomial at 1 + ta1
        assert sympy.expand(narayana_moment(2) - (TA1 + 2)) == 0
        assert narayana_moment(0) == 1

    @given(st.integers(min_value=0, max_value=8))
    def test_narayana_at_one_counts_dyck_paths(self, k):
        assert narayana_moment(k, 0) == catalan(k)

    def test_a1_fixed_pinned(self):
        assert _zero(a1_fixed(1) - (ALPHA1 + 1 - KAPPA) / KAPPA)
        assert _zero(a1_fixed(0))
        with pytest.raises(StructuralError):
            a1_fixed(-2)

    def test_a1_orderN_base_cases(self):
        assert a1_orderN(0) == 0
        assert _zero(a1_orderN(1) - (1 - KAPPA) / KAPPA)
        assert _zero(a1_orderN(2) - (1 - KAPPA) * (3 * TA1 + 4) / KAPPA)

    def test_negative_moment_pinned(self):
        assert _zero(negative_moment(0, 1) - 1 / TA1)
        assert _zero(negative_moment(0, 2) - (TA1 + 1) / TA1 ** 3)
        assert _zero(negative_moment(0, 3) - (TA1 + 1) * (TA1 + 2) / TA1 ** 5)
        assert negative_moment(0, 0) == 1
        assert negative_moment(1, 0) == 0
        assert negative_moment(1, 1) == 0  # Gegenbauer terms cancel at k=1
        with pytest.raises(CapabilityError):
            negative_moment(2, 1)
        with pytest.raises(StructuralError):
            negative_moment(0, -1)


class TestGegenbauer:
    def test_bases(self):
        x = sympy.Symbol("x")
        assert gegenbauer(0, Rational(1, 2), x) == 1
        assert sympy.expand(gegenbauer(1, 1, x) - 2 * x) == 0
        assert gegenbauer(-1, 1, x) == 0
        assert gegenbauer(-3, Rational(1, 2), x) == 0

    @given(st.integers(min_value=0, max_value=7),
           st.sampled_from([Rational(1, 2), 1, Rational(3, 2), 2]))
    @settings(max_examples=25, deadline=None)
    def test_matches_sympy(self, n, mu):
        x = sympy.Symbol("x")
        assert sympy.expand(
            gegenbauer(n, mu, x) - sympy.gegenbauer(n, mu, x)) == 0

    def test_generating_function(self):
        # sum_n C_n^{ (mu) }(x) t^n == (1 - 2 x t + t^2)^{-mu} at x = 3/2
        t = sympy.Symbol("t")
        x0 = Rational(3, 2)
        mu = Rational(1, 2)
        lhs = sum(gegenbauer(n, mu, x0) * t ** n for n in range(7))
        rhs = sympy.series((1 - 2 * x0 * t + t ** 2) ** (-mu), t, 0, 7).removeO()
        assert sympy.expand(lhs - rhs) == 0


# ---------------------------------------------------------------------------
# the series routes
# ---------------------------------------------------------------------------

class TestLaguerreFixedMoments:
    def test_first_four_scaled_moments_exact(self, tables):
        exps = expand_moments(tables[("laguerre", "fixed")], 3, 3)
        K, A = KAPPA, ALPHA1
        u = N * K
        refs = {
            0: sympy.Integer(1),
            1: 1 + (1 - K + A) / u,
            2: 2 + (4 - 4 * K + 3 * A) / u
               + (2 - 4 * K + 2 * K ** 2 + 3 * A - 3 * K * A + A ** 2) / u ** 2,
            3: 5 - 2 * (8 * K - 5 * A - 8) / u
               + (17 - 33 * K + 17 * K ** 2 + 21 * A - 21 * K * A + 6 * A ** 2) / u ** 2
               + (6 - 17 * K + 17 * K ** 2 - 6 * K ** 3 + 11 * A - 21 * K * A
                  + 11 * K ** 2 * A + 6 * A ** 2 - 6 * K * A ** 2 + A ** 3) / u ** 3,
        }
        for k, ref in refs.items():
            assert exps[k].truncated_at is None
            assert _zero(exps[k].as_expr() - ref), k

    def test_closed_forms_to_k6(self, tables):
        exps = expand_moments(tables[("laguerre", "fixed")], 6, 1)
        for e in exps:
            assert e.coefficient(0) == catalan(e.k)
            assert _zero(e.coefficient(1) - a1_fixed(e.k))

    def test_polynomial_degree_is_k(self, tables):
        # the 1/N series terminates exactly at order k
        exps = expand_moments(tables[("laguerre", "fixed")], 3, 3)
        for e in exps:
            assert e.degree_in_invN() == e.k

    def test_missing_order_names_the_coefficient(self, tables):
        with pytest.raises(SeriesTruncationError, match="W_1\\^4"):
            expand_moments(tables[("laguerre", "fixed")], 2, 4)

    def test_bad_ranges(self, tables):
        with pytest.raises(StructuralError):
            expand_moments(tables[("laguerre", "fixed")], -1, 0)


class TestLaguerreOrderNMoments:
    def test_leading_is_shifted_narayana(self, tables):
        exps = expand_moments(tables[("laguerre", "orderN-one-sided")], 5, 0)
        for e in exps:
            lead = 1 if e.k == 0 else (TA1 + 1) * narayana_moment(e.k)
            assert _zero(e.coefficient(0) - lead), e.k

    def test_next_order_is_gegenbauer_combination(self, tables):
        exps = expand_moments(tables[("laguerre", "orderN-one-sided")], 5, 1)
        for e in exps:
            assert _zero(e.coefficient(1) - a1_orderN(e.k)), e.k

    def test_negative_moments_match_closed_forms(self, tables):
        negs = expand_negative_moments(
            tables[("laguerre", "orderN-one-sided")], 5, 1)
        for e in negs:
            k = -e.k
            assert _zero(e.coefficient(0) - negative_moment(0, k)), k
            # series convention carries the opposite sign at order 1/N
            assert _zero(e.coefficient(1) + negative_moment(1, k)), k

    def test_negative_moment_values_at_ta1_3(self, tables):
        negs = expand_negative_moments(
            tables[("laguerre", "orderN-one-sided")], 3, 1)
        vals = {-e.k: e.coefficient(0).subs(TA1, 3) for e in negs}
        assert vals == {1: Rational(1, 3), 2: Rational(4, 27),
                        3: Rational(20, 243)}

    def test_negative_moments_need_gap_at_origin(self, tables):
        with pytest.raises(CapabilityError):
            expand_negative_moments(tables[("laguerre", "fixed")], 2, 1)
        with pytest.raises(CapabilityError):
            expand_negative_moments(tables[("jacobi", "fixed")], 2, 1)

    def test_substitution_consistency_with_fixed(self, tables):
        # fixed-parameter polynomials survive alpha1 -> ta1 N kappa
        fixed = expand_moments(tables[("laguerre", "fixed")], 3, 3)
        order = expand_moments(tables[("laguerre", "orderN-one-sided")], 3, 1)
        for k in range(4):
            assert substituted_expansion_check(fixed[k], order[k]), k

    def test_substitution_check_validates_inputs(self, tables):
        fixed = expand_moments(tables[("laguerre", "fixed")], 2, 2)
        order = expand_moments(tables[("laguerre", "orderN-one-sided")], 2, 1)
        with pytest.raises(StructuralError):
            substituted_expansion_check(fixed[1], order[2])
        with pytest.raises(StructuralError):
            substituted_expansion_check(order[1], order[1])


class TestGaussianMoments:
    def test_odd_moments_vanish(self, tables):
        exps = expand_moments(tables[("gaussian", "fixed")], 5, 2)
        for e in exps:
            if e.k % 2:
                assert e.terms == ()

    def test_even_leading_are_scaled_catalans(self, tables):
        # moments of the unit semicircle: catalan(k/2) / 4^{k/2}
        exps = expand_moments(tables[("gaussian", "fixed")], 6, 0)
        for e in exps:
            if e.k % 2 == 0:
                assert e.coefficient(0) == Rational(catalan(e.k // 2), 4 ** (e.k // 2))

    def test_variance_correction(self, tables):
        exps = expand_moments(tables[("gaussian", "fixed")], 2, 2)
        assert _zero(exps[2].coefficient(1) - (1 - KAPPA) / (4 * KAPPA))
        # the 1/N^2 piece of the scaled variance vanishes identically
        assert exps[2].coefficient(2) == 0
        assert exps[2].degree_in_invN() == 1

    def test_raw_expr_unavailable(self, tables):
        e = expand_moments(tables[("gaussian", "fixed")], 2, 2)[2]
        with pytest.raises(StructuralError):
            e.raw_expr()


class TestJacobiMoments:
    def test_leading_coefficients(self, tables):
        exps = expand_moments(tables[("jacobi", "fixed")], 3, 2)
        for e in exps:
            assert e.scheme == "unscaled"
            assert e.truncated_at == 2
            assert _zero(e.coefficient(0) - binomial(2 * e.k, e.k) / 4 ** e.k)

    def test_subleading_coefficients(self, tables):
        exps = expand_moments(tables[("jacobi", "fixed")], 3, 2)
        K, A1, A2 = KAPPA, ALPHA1, ALPHA2
        for e in exps[1:]:
            ref = (K - 1 - 2 * A2) / 4 \
                + (A1 + A2 + 1 - K) * binomial(2 * e.k, e.k) / (2 * 4 ** e.k)
            assert _zero(e.coefficient(1) - ref), e.k
        assert exps[0].coefficient(1) == 0

    def test_second_correction_of_m1(self, tables):
        exps = expand_moments(tables[("jacobi", "fixed")], 1, 2)
        ref = (ALPHA1 - ALPHA2) * (2 * KAPPA - 2 - ALPHA1 - ALPHA2) / 8
        assert _zero(exps[1].coefficient(2) - ref)

    def test_truncated_coefficient_access(self, tables):
        e = expand_moments(tables[("jacobi", "fixed")], 1, 1)[1]
        with pytest.raises(SeriesTruncationError):
            e.coefficient(2)


# ---------------------------------------------------------------------------
# exact finite-N moments
# ---------------------------------------------------------------------------

class TestExactJacobiMoments:
    def test_m1_reference_point(self):
        assert jacobi_exact_m1().evaluate(1, 2, 0, 0) == Fraction(1)

    def test_m1_two_leading_orders(self, tables):
        exps = expand_moments(tables[("jacobi", "fixed")], 1, 1)
        two = N * exps[1].coefficient(0) + exps[1].coefficient(1) / KAPPA
        assert sympy.expand(jacobi_exact_m1().large_N(2) - two) == 0

    def test_m1_expansion_matches_series_route(self, tables):
        # all computed (N kappa)^{-l} orders agree with the exact moment
        exps = expand_moments(tables[("jacobi", "fixed")], 1, 2)
        u = sympy.Dummy("u", positive=True)
        diff = cancel(
            (jacobi_exact_m1().value - exps[1].as_expr()).subs(N, 1 / u))
        ser = sympy.series(diff, u, 0, 2).removeO()
        for i in range(-1, 2):
            assert cancel(ser.coeff(u, i)) == 0, i

    def test_m3_expansion_matches_series_route(self, tables):
        exps = expand_moments(tables[("jacobi", "fixed")], 3, 2)
        u = sympy.Dummy("u", positive=True)
        diff = cancel(
            (jacobi_exact_m3().value - exps[3].as_expr()).subs(N, 1 / u))
        ser = sympy.series(diff, u, 0, 2).removeO()
        for i in range(-1, 2):
            assert cancel(ser.coeff(u, i)) == 0, i

    def test_m3_spot_values(self):
        # beta = 2 (kappa = 1) flat-weight ensembles on [0, 1]:
        #   N = 1:  m3 = int_0^1 x^3 dx / int_0^1 dx = 1/4
        #   N = 2:  m3 = int (x^3+y^3)(x-y)^2 / int (x-y)^2 = 3/5
        assert jacobi_exact_m3().evaluate(1, 1, 0, 0) == Fraction(1, 4)
        assert jacobi_exact_m3().evaluate(1, 2, 0, 0) == Fraction(3, 5)
        assert jacobi_exact_m1().evaluate(1, 1, 0, 0) == Fraction(1, 2)

    def test_pole_raises(self):
        # denominator 2(N-1) kappa + alpha1 + alpha2 + 2 vanishes
        with pytest.raises(EvaluationError):
            jacobi_exact_m1().evaluate(1, 1, 0, -2)
        # kappa = -1 kills a kappa-only factor of the m3 denominators
        with pytest.raises(EvaluationError):
            jacobi_exact_m3().evaluate(-1, 2, "1/2", 0)

    def test_rejects_floats(self):
        with pytest.raises(StructuralError):
            jacobi_exact_m1().evaluate(1.25, 4, 0.1, 0)

    def test_rational_accepts_strings_and_fractions(self):
        v = jacobi_exact_m1().evaluate(Fraction(3, 2), 4, "1/2", 0)
        assert isinstance(v, Fraction)

    def test_degrees_in_N(self):
        for em in (jacobi_exact_m1(), jacobi_exact_m3()):
            num, den = sympy.together(em.value).as_numer_denom()
            assert sympy.degree(sympy.Poly(num, N)) == 2 * em.k
            assert sympy.degree(sympy.Poly(den, N)) == 2 * em.k - 1


class TestCircularMoments:
    def test_m1_values(self):
        assert circular_M(1, 3, 4) == Fraction(6, 5)
        # kappa N / (kappa N - kappa + 1)
        assert circular_M(1, Fraction(1, 2), 6) == Fraction(6, 7)

    def test_m3_routes_agree(self):
        for kp, n in [(2, 5), (Fraction(1, 3), 7), (5, 4), (Fraction(7, 2), 9)]:
            a = circular_M(3, kp, n, route="specialization")
            b = circular_M(3, kp, n, route="partial-fractions")
            assert a == b, (kp, n)
        assert circular_M(3, 2, 5) == Fraction(458, 315)

    def test_m3_is_unity_at_kappa_1(self):
        for n in (2, 5, 11):
            assert circular_M(3, 1, n) == Fraction(1)

    def test_error_paths(self):
        with pytest.raises(CapabilityError):
            circular_M(2, 2, 5)
        with pytest.raises(StructuralError):
            circular_M(4, 2, 5)
        with pytest.raises(StructuralError):
            circular_M(1, 2, 5, route="partial-fractions")
        with pytest.raises(StructuralError):
            circular_M(1, 2, 5, route="nope")
        with pytest.raises(EvaluationError):
            circular_M(1, 2, "1/2")  # kappa N - kappa + 1 == 0

    def test_slice_limit_at_kappa_1(self):
        # on the kappa = 1 slice M_1 is identically 1, so even the point
        # where the two-variable denominator vanishes evaluates cleanly
        assert circular_M(1, 1, 0) == Fraction(1)


# ---------------------------------------------------------------------------
# inversion symmetries
# ---------------------------------------------------------------------------

class TestInversionSymmetry:
    def test_laguerre_moments(self, tables):
        for k in (1, 2, 3):
            exps = expand_moments(tables[("laguerre", "fixed")], k, k)
            assert laguerre_moment_symmetry_check(exps[k]), k

    def test_laguerre_requires_complete_expansion(self, tables):
        e = expand_moments(tables[("laguerre", "fixed")], 3, 1)[3]
        with pytest.raises(SeriesTruncationError):
            laguerre_moment_symmetry_check(e)

    def test_laguerre_rejects_other_families(self, tables):
        e = expand_moments(tables[("jacobi", "fixed")], 1, 1)[1]
        with pytest.raises(StructuralError):
            laguerre_moment_symmetry_check(e)

    def test_jacobi_exact_moments(self):
        assert jacobi_moment_symmetry_check(jacobi_exact_m1())
        assert jacobi_moment_symmetry_check(jacobi_exact_m3(), samples=3)

    def test_jacobi_weight_is_not_minus_kappa_cubed(self):
        # the overall factor is k-independent; (-kappa)^3 fails for m3
        em = jacobi_exact_m3()
        b = {KAPPA: Rational(2), N: Rational(5),
             ALPHA1: Rational(1), ALPHA2: Rational(3, 2)}
        lhs = em.value.subs(b)
        rhs = em.value.subs({KAPPA: Rational(1, 2), N: Rational(-10),
                             ALPHA1: Rational(-1, 2), ALPHA2: Rational(-3, 4)})
        assert cancel(lhs - (-Rational(2)) ** 3 * rhs) != 0
        assert cancel(lhs - (-Rational(1, 2)) * rhs) == 0

    def test_resolvent_laguerre(self, tables):
        tab = tables[("laguerre", "fixed")]
        for l in range(4):
            assert resolvent_kappa_inversion_check(tab[(1, l)], l, "laguerre")

    def test_resolvent_jacobi(self, tables):
        tab = tables[("jacobi", "fixed")]
        for l in range(3):
            assert resolvent_kappa_inversion_check(tab[(1, l)], l, "jacobi")

    def test_resolvent_weights_differ(self, tables):
        # the jacobi weight (-kappa)^l is not interchangeable with (-1)^l
        tab = tables[("jacobi", "fixed")]
        assert not resolvent_kappa_inversion_check(tab[(1, 1)], 1, "laguerre")
        with pytest.raises(StructuralError):
            resolvent_kappa_inversion_check(tab[(1, 1)], 1, "gaussian")


# ---------------------------------------------------------------------------
# bridge, diagnostics, emission
# ---------------------------------------------------------------------------

class TestParameterBridge:
    def test_even_powers_only(self):
        r = scalar("r")
        assert to_parameter_expr(r ** 2) == KAPPA
        assert to_parameter_expr(r ** 2, half_powers=2) == 1
        with pytest.raises(ConsistencyError):
            to_parameter_expr(r)

    def test_mixed_fraction(self):
        g1, a1 = scalar("g1"), scalar("a1")
        got = to_parameter_expr(a1 / g1 ** 2)
        assert _zero(got - ALPHA1 / (TA1 + 1))


class TestDiagnosticsAndEmission:
    def test_palindromic_kappa_report(self, tables):
        exps = expand_moments(tables[("laguerre", "fixed")], 3, 3)
        rep = denominator_zero_report(exps[3])
        assert [r["i"] for r in rep] == [0, 1, 2, 3]
        assert all(r["palindromic"] for r in rep)
        assert all(r["zeros_on_unit_circle"] for r in rep)

    def test_csv_rows(self, tables):
        exps = expand_moments(tables[("laguerre", "fixed")], 1, 1)
        rows = moment_csv_rows(exps, bindings={"kappa": 2, "alpha1": "1/2"})
        assert rows[0] == ("ensemble", "regime", "k", "i",
                           "coefficient", "float")
        body = rows[1:]
        assert all(r[0] == "laguerre" and r[1] == "fixed" for r in body)
        # alpha1=1/2, kappa=2  ->  a_1^{(1)} = (1/2 + 1 - 2)/2 = -1/4
        a11 = [r for r in body if r[2] == 1 and r[3] == 1]
        assert a11[0][5] == repr(-0.25)

    def test_csv_symbolic_without_bindings(self, tables):
        exps = expand_moments(tables[("laguerre", "fixed")], 1, 1)
        rows = moment_csv_rows(exps)
        assert any(r[5] == "" for r in rows[1:])
        with pytest.raises(StructuralError):
            moment_csv_rows(exps, bindings={"beta": 2})

    def test_exact_moment_record(self):
        rec = exact_moment_record(jacobi_exact_m1())
        assert rec["k"] == 1
        assert set(rec) == {"k", "value", "numerator", "denominator", "symbols"}
        assert "N" in rec["symbols"] and "kappa" in rec["symbols"]
        # bare "N" would sympify to the evalf function, so supply locals
        syms = {"N": N, "kappa": KAPPA, "alpha1": ALPHA1, "alpha2": ALPHA2}
        num = sympy.sympify(rec["numerator"], locals=syms)
        den = sympy.sympify(rec["denominator"], locals=syms)
        assert _zero(num / den - jacobi_exact_m1().value)
