"""Tests for the loop-equation hierarchy solver."""

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from betaloop.algebra import (
    AlgebraicFn,
    CapabilityError,
    StructuralError,
    numeric_env,
    parse_text,
    scalar,
)
from betaloop import loop_solver as ls
from betaloop.loop_solver import (
    ConsistencyError,
    CorrelatorTable,
    EnsembleSpec,
    SchedulingError,
    connected_from_unconnected,
    equation_residual,
    jacobi_limit_check,
    run_schedule,
    schedule_keys,
    solve_leading,
    solve_order,
    unconnected_from_connected,
    unknown_coefficient,
    w2_universal,
)

ALL_SPECS = [
    ("gaussian", "fixed"),
    ("laguerre", "fixed"),
    ("laguerre", "orderN-one-sided"),
    ("laguerre", "general-linear"),
    ("jacobi", "fixed"),
    ("jacobi", "orderN-one-sided"),
    ("jacobi", "orderN-two-sided"),
]


@pytest.fixture(scope="module")
def tables():
    """Solved tables shared across the module (cheap depths only)."""
    out = {}
    out[("gaussian", "fixed")] = run_schedule(EnsembleSpec("gaussian"), 3)
    out[("laguerre", "fixed")] = run_schedule(EnsembleSpec("laguerre"), 3)
    out[("laguerre", "orderN-one-sided")] = run_schedule(
        EnsembleSpec("laguerre", "orderN-one-sided"), 2)
    out[("laguerre", "general-linear")] = run_schedule(
        EnsembleSpec("laguerre", "general-linear"), 1)
    out[("jacobi", "fixed")] = run_schedule(EnsembleSpec("jacobi"), 2)
    out[("jacobi", "orderN-one-sided")] = run_schedule(
        EnsembleSpec("jacobi", "orderN-one-sided"), 1)
    out[("jacobi", "orderN-two-sided")] = run_schedule(
        EnsembleSpec("jacobi", "orderN-two-sided"), 1)
    return out


class TestEnsembleSpec:
    def test_invalid_combo_rejected(self):
        with pytest.raises(StructuralError):
            EnsembleSpec("gaussian", "orderN-one-sided")
        with pytest.raises(StructuralError):
            EnsembleSpec("jacobi", "general-linear")
        with pytest.raises(StructuralError):
            EnsembleSpec("hermite")

    def test_regime_aliases(self):
        assert EnsembleSpec("laguerre", "orderN_one_sided").regime == "orderN-one-sided"
        assert EnsembleSpec("jacobi", "two-sided").regime == "orderN-two-sided"

    def test_supports(self):
        assert EnsembleSpec("gaussian").support.endpoints_float({}) == (-1.0, 1.0)
        assert EnsembleSpec("laguerre").support.endpoints_float({}) == (0.0, 4.0)
        a, b = EnsembleSpec("laguerre", "orderN-one-sided").support.endpoints_float(
            numeric_env({"ta1": 3.0}))
        assert (a, b) == (1.0, 9.0)
        # two-sided endpoints are not rational in the parameters
        sup = EnsembleSpec("jacobi", "orderN-two-sided").support
        assert not sup.has_endpoints

    def test_one_sided_jacobi_left_edge(self):
        sup = EnsembleSpec("jacobi", "orderN-one-sided").support
        a, b = sup.endpoints_float(numeric_env({"ta1": 2.0}))
        assert b == pytest.approx(1.0)
        assert a == pytest.approx(4.0 / 16.0)


class TestSchedule:
    def test_known_prefix(self):
        assert schedule_keys(0) == [(1, 0)]
        assert schedule_keys(3) == [(1, 0), (1, 1), (2, 0), (1, 2), (2, 1), (1, 3)]
        assert schedule_keys(5)[-3:] == [(3, 1), (2, 3), (1, 5)]

    def test_every_chain_reaches_its_target(self):
        for lm in range(6):
            assert (1, lm) in schedule_keys(lm)

    def test_arity_cap(self):
        with pytest.raises(CapabilityError, match="arity cap"):
            run_schedule(EnsembleSpec("laguerre"), 6)

    def test_jacobi_multiorder_named_key(self):
        with pytest.raises(CapabilityError, match=r"W_2\^1"):
            run_schedule(EnsembleSpec("jacobi"), 3)

    def test_missing_prerequisite(self):
        spec = EnsembleSpec("laguerre")
        table = CorrelatorTable(spec)
        table[(1, 0)] = solve_leading(spec)
        with pytest.raises(SchedulingError):
            solve_order(spec, table, 1, 2)  # needs (2,0) and (1,1)


class TestLeading:
    @pytest.mark.parametrize("family,regime", ALL_SPECS)
    def test_decay_normalization(self, family, regime):
        W = solve_leading(EnsembleSpec(family, regime))
        ser = W.series_at_infinity(2)
        assert not ser.has_poly_part()
        assert ser.coeff(1) == 1

    def test_gaussian_semicircle(self):
        spec = EnsembleSpec("gaussian")
        W = solve_leading(spec)
        y = AlgebraicFn.y(0, 1, spec.support)
        s = AlgebraicFn.from_string("s1", 1, spec.support)
        assert W == (s - y) * 2
        # spectral moments of the semicircle on (-1, 1): Catalan / 4^k
        ser = W.series_at_infinity(9)
        catalan = [1, 1, 2, 5, 14]
        for k, c in enumerate(catalan):
            assert ser.coeff(2 * k + 1) == Fraction(c, 4 ** k)
            if k:
                assert ser.coeff(2 * k) == 0

    def test_marchenko_pastur_like(self):
        spec = EnsembleSpec("laguerre")
        W = solve_leading(spec)
        y = AlgebraicFn.y(0, 1, spec.support)
        s = AlgebraicFn.from_string("s1", 1, spec.support)
        assert W == (AlgebraicFn.one(1, spec.support) - y / s) / 2

    def test_jacobi_fixed_arcsine(self):
        spec = EnsembleSpec("jacobi")
        W = solve_leading(spec)
        assert W == AlgebraicFn.y(0, 1, spec.support) ** -1

    def test_hard_edge_lifted_support_consistency(self):
        # moving left edge: at ta1 = 3 the support is (1, 9)
        spec = EnsembleSpec("laguerre", "orderN-one-sided")
        W = solve_leading(spec).substitute_params({"ta1": 3})
        val = W.eval_complex([12.0], {})
        # resolvent of a prob. measure on (1,9) at s=12 lies in (1/11, 1/3)
        assert 1 / 11 < val.real < 1 / 3
        assert abs(val.imag) < 1e-14


class TestUniversalTwoPoint:
    @pytest.mark.parametrize("family,regime", [
        ("gaussian", "fixed"),
        ("laguerre", "fixed"),
        ("laguerre", "orderN-one-sided"),
        ("jacobi", "fixed"),
        ("jacobi", "orderN-two-sided"),
    ])
    def test_loop_equation_cross_check(self, family, regime):
        # w2_universal verifies itself against the n=2 equation when check=True
        W2 = w2_universal(EnsembleSpec(family, regime), check=True)
        assert W2.nvars == 2

    def test_symmetry_in_arguments(self, tables):
        W2 = tables[("laguerre", "fixed")][(2, 0)]
        assert W2.relabel_vars({0: 1, 1: 0}, 2) == W2

    def test_diagonal_closed_form(self, tables):
        # (b-a)^2 / (16 (s-a)^2 (s-b)^2) on the fixed Laguerre support (0,4)
        W2 = tables[("laguerre", "fixed")][(2, 0)]
        diag = W2.diagonal_limit()
        sup = EnsembleSpec("laguerre").support
        expected = AlgebraicFn.from_string("1/(s1**2*(s1-4)**2)", 1, sup)
        assert diag == expected


class TestUnknownCoefficient:
    """The analytic coefficient must equal LHS(W=1) - LHS(W=0)."""

    @pytest.mark.parametrize("family,regime,n,l", [
        ("laguerre", "fixed", 1, 1),
        ("laguerre", "orderN-one-sided", 1, 2),
        ("gaussian", "fixed", 2, 1),
        ("jacobi", "orderN-two-sided", 1, 1),
        ("jacobi", "fixed", 2, 0),
    ])
    def test_two_build_consistency(self, tables, family, regime, n, l):
        spec = EnsembleSpec(family, regime)
        base = tables[(family, regime)]
        t_one = CorrelatorTable(spec)
        t_zero = CorrelatorTable(spec)
        for key in base.keys():
            t_one[key] = base[key]
            t_zero[key] = base[key]
        t_one[(n, l)] = AlgebraicFn.one(n, spec.support)
        t_zero[(n, l)] = AlgebraicFn.zero(n, spec.support)
        lhs_one = equation_residual(spec, t_one, n, l)
        lhs_zero = equation_residual(spec, t_zero, n, l)
        C = unknown_coefficient(spec, base, n, l)
        if n > 1:
            C = C.relabel_vars({0: 0}, n)
        assert lhs_one - lhs_zero == C


class TestResiduals:
    @pytest.mark.parametrize("family,regime", ALL_SPECS)
    def test_all_solved_keys_vanish(self, tables, family, regime):
        spec = EnsembleSpec(family, regime)
        tab = tables[(family, regime)]
        for (n, l) in tab.keys():
            assert equation_residual(spec, tab, n, l).is_zero(), (n, l)

    def test_perturbed_table_fails(self, tables):
        """Guards against a residual builder that is identically zero."""
        spec = EnsembleSpec("laguerre")
        base = tables[("laguerre", "fixed")]
        tampered = CorrelatorTable(spec)
        for key in base.keys():
            tampered[key] = base[key]
        bad = base[(1, 1)] + AlgebraicFn.from_string("1/s1**2", 1, spec.support)
        tampered[(1, 1)] = bad
        assert not equation_residual(spec, tampered, 1, 1).is_zero()
        # downstream equations that consume (1,1) break too
        assert not equation_residual(spec, tampered, 1, 2).is_zero()

    def test_jacobi_multipoint_subleading_refused(self, tables):
        spec = EnsembleSpec("jacobi")
        with pytest.raises(CapabilityError):
            equation_residual(spec, tables[("jacobi", "fixed")], 2, 1)

    def test_arity_cap_in_residual(self, tables):
        with pytest.raises(CapabilityError):
            equation_residual(EnsembleSpec("laguerre"),
                              tables[("laguerre", "fixed")], 4, 0)


class TestDerivedGaussianValues:
    """Frozen via the exact second moment of the e^{-x^2} ensemble:
    m2 = N/2 + kappa N(N-1)/2, verified by quadrature at small N, gives
    [s^-3] W_1^0 = 1/4, [s^-3] W_1^1 = -h/4, zero at higher orders."""

    def test_subleading_resolvent(self, tables):
        spec = EnsembleSpec("gaussian")
        y = AlgebraicFn.y(0, 1, spec.support)
        s = AlgebraicFn.from_string("s1", 1, spec.support)
        h = scalar("h")
        W11 = tables[("gaussian", "fixed")][(1, 1)]
        assert W11 == y ** -1 * (h / 2) - s * y ** -2 * (h / 2)

    def test_second_moment_coefficients(self, tables):
        tab = tables[("gaussian", "fixed")]
        h = scalar("h")
        assert tab[(1, 0)].series_at_infinity(3).coeff(3) == Fraction(1, 4)
        assert tab[(1, 1)].series_at_infinity(3).coeff(3) == h / (-4)
        assert tab[(1, 2)].series_at_infinity(3).coeff(3) == 0
        assert tab[(1, 3)].series_at_infinity(3).coeff(3) == 0

    def test_odd_moments_vanish(self, tables):
        # even weight: no s^{-2} or s^{-4} tails at any computed order
        tab = tables[("gaussian", "fixed")]
        for l in range(4):
            ser = tab[(1, l)].series_at_infinity(4)
            assert ser.coeff(2) == 0
            assert ser.coeff(4) == 0

    def test_odd_orders_vanish_at_beta_two(self, tables):
        tab = tables[("gaussian", "fixed")]
        assert tab[(1, 1)].substitute_params({"kappa": 1}).is_zero()
        assert tab[(1, 3)].substitute_params({"kappa": 1}).is_zero()
        assert not tab[(1, 2)].substitute_params({"kappa": 1}).is_zero()


class TestDecayInvariant:
    """Tail behaviour of the one-point corrections at infinity.

    For the scaled families (gaussian, laguerre) W_1^l = O(1/s^{l+1}):
    the first l moment coefficients vanish identically.  Jacobi moments
    are rational in N rather than polynomial, so only the excess mass
    (the 1/s coefficient) vanishes for l >= 1 there.
    """

    @pytest.mark.parametrize("family,regime", ALL_SPECS)
    def test_tail_orders(self, tables, family, regime):
        tab = tables[(family, regime)]
        for (n, l) in tab.keys():
            if n != 1:
                continue
            ser = tab[(1, l)].series_at_infinity(l + 1)
            assert not ser.has_poly_part()
            top = min(l, 1) if family == "jacobi" else l
            for k in range(1, top + 1):
                assert ser.coeff(k) == 0, (l, k)


class TestRegimeDegenerations:
    def test_general_linear_offset_zero_is_orderN(self, tables):
        gl = tables[("laguerre", "general-linear")]
        on = tables[("laguerre", "orderN-one-sided")]
        for key in [(1, 0), (1, 1)]:
            assert gl[key].substitute_params({"d1": 0}) == on[key]

    def test_orderN_ta_zero_is_fixed_alpha_zero(self, tables):
        # hard-edge-lifted leading resolvent degenerates onto (0,4) support
        on = tables[("laguerre", "orderN-one-sided")][(1, 0)]
        fx = tables[("laguerre", "fixed")][(1, 0)]
        assert on.substitute_params({"ta1": 0}) == fx

    def test_jacobi_two_sided_collapses_to_one_sided(self, tables):
        two = tables[("jacobi", "orderN-two-sided")]
        one = tables[("jacobi", "orderN-one-sided")]
        for key in [(1, 0), (1, 1)]:
            collapsed = two[key].substitute_params({"ta2": 0, "d2": scalar("a2")})
            assert collapsed == one[key]

    def test_jacobi_one_sided_collapses_to_fixed(self, tables):
        one = tables[("jacobi", "orderN-one-sided")]
        fx = tables[("jacobi", "fixed")]
        for key in [(1, 0), (1, 1)]:
            collapsed = one[key].substitute_params({"ta1": 0, "d1": scalar("a1")})
            assert collapsed == fx[key]


class TestLimitChecks:
    def test_to_laguerre(self):
        rep = jacobi_limit_check("to_laguerre", order=1)
        assert rep["passed"]
        assert [lv["level"] for lv in rep["levels"]] == [0, 1]

    def test_to_gaussian(self):
        rep = jacobi_limit_check("to_gaussian", order=1)
        assert rep["passed"]

    def test_bad_direction(self):
        with pytest.raises(StructuralError):
            jacobi_limit_check("to_hermite")

    def test_depth_cap(self):
        with pytest.raises(CapabilityError):
            jacobi_limit_check("to_laguerre", order=2)


class TestRecords:
    def test_record_fields_and_round_trip(self, tables):
        recs = tables[("laguerre", "orderN-one-sided")].to_records()
        assert {r["n"] for r in recs} == {1, 2}
        r = recs[0]
        assert r["family"] == "laguerre"
        assert r["regime"] == "orderN-one-sided"
        assert "scaled by N*kappa" in r["scaling"]
        fn = parse_text(r["expression"])
        assert fn == tables[("laguerre", "orderN-one-sided")][(r["n"], r["l"])]

    def test_gaussian_scaling_note(self, tables):
        recs = tables[("gaussian", "fixed")].to_records()
        assert all("sqrt(2*N*kappa)" in r["scaling"] for r in recs)


# ---------------------------------------------------------------------------
# connected <-> unconnected conversions
# ---------------------------------------------------------------------------

def _pair_values(m1a, m1b, m2):
    return {(1,): m1a, (2,): m1b, (1, 2): m2}


class TestPartitionConversion:
    def test_two_point_cumulant(self):
        vals = _pair_values(Fraction(3), Fraction(5), Fraction(19))
        conn = connected_from_unconnected(vals)
        assert conn[(1, 2)] == 19 - 15
        assert conn[(1,)] == 3

    def test_three_point_explicit(self):
        # all unconnected averages equal to products of singles: cumulants vanish
        singles = {1: Fraction(2), 2: Fraction(-1), 3: Fraction(4)}
        vals = {}
        for S in [(1,), (2,), (3,), (1, 2), (1, 3), (2, 3), (1, 2, 3)]:
            prod = Fraction(1)
            for i in S:
                prod *= singles[i]
            vals[S] = prod
        conn = connected_from_unconnected(vals)
        assert conn[(1, 2)] == 0
        assert conn[(1, 2, 3)] == 0

    def test_inverse_on_known_triple(self):
        conn = {(1,): Fraction(1), (2,): Fraction(2), (3,): Fraction(3),
                (1, 2): Fraction(1, 2), (1, 3): Fraction(0), (2, 3): Fraction(5),
                (1, 2, 3): Fraction(-7)}
        unc = unconnected_from_connected(conn)
        # inclusion-exclusion by hand for the full set:
        # m123 = c123 + c1*c23 + c2*c13 + c3*c12 + c12*c3 ... careful: standard
        # moment-from-cumulant for three indices:
        expected = (Fraction(-7)
                    + Fraction(1) * Fraction(5)
                    + Fraction(2) * Fraction(0)
                    + Fraction(3) * Fraction(1, 2)
                    + Fraction(1) * Fraction(2) * Fraction(3))
        assert unc[(1, 2, 3)] == expected

    @given(st.lists(st.fractions(min_value=-5, max_value=5), min_size=31, max_size=31))
    @settings(max_examples=25, deadline=None)
    def test_round_trip_five_indices(self, raw):
        import itertools as it
        subsets = [S for k in range(1, 6) for S in it.combinations(range(1, 6), k)]
        vals = dict(zip(subsets, raw))
        back = unconnected_from_connected(connected_from_unconnected(vals))
        for S in subsets:
            assert back[S] == vals[S]

    def test_empty_rejected(self):
        with pytest.raises(StructuralError):
            connected_from_unconnected({})
        with pytest.raises(StructuralError):
            unconnected_from_connected({})

    def test_missing_subset_rejected(self):
        with pytest.raises(StructuralError):
            connected_from_unconnected({(1, 2): Fraction(1), (1,): Fraction(1)})
