"""Tests for the reverse Holder comparison machinery.

Bessel references were computed with mpmath at 25 digits; the Euclidean
constants against an independent mpmath tanh-sinh integration of the
moment formula.  The p = 1, q = 2, n = 2 constant has the closed form
sqrt(lam / 4 pi), which pins the whole normalization chain.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from capspectra import (
    ManifoldSpec,
    RearrangedProfile,
    cap_eigenvalue,
    cap_volume,
    integro_differential_residual,
    lp_norm_rearranged,
    profile_lp_norm,
    volume_profile,
)
from capspectra.chiti import (
    DEFAULT_TOLERANCES,
    VerificationReport,
    bessel_first_zero,
    bessel_j,
    chiti_constant_euclidean,
    crossing_points,
    flat_limit_consistency,
    make_report,
    normalize_pair,
    resolve_tolerances,
    reverse_holder_check,
    cap_volume_bound_report,
)

# mpmath besseljzero, 25 digits
BESSEL_ZEROS = [
    (0.0, 2.4048255576957728),
    (0.5, 3.1415926535897932),
    (1.0, 3.8317059702075123),
    (1.5, 4.4934094579090642),
    (2.0, 5.1356223018406826),
    (3.5, 6.98793200050052),
    (5.0, 8.771483815959954),
    (7.3, 11.429093752762),
    (10.0, 14.475500686554541),
]

# mpmath besselj, 25 digits; covers series, onset and asymptotic branches
BESSEL_VALUES = [
    (0.0, 0.3, 0.97762624653829609),
    (0.0, 8.0, 0.17165080713755391),
    (0.0, 21.4, -0.032301083770998865),
    (0.0, 35.0, -0.12684568275631257),
    (0.0, 50.0, 0.055812327669251815),
    (0.5, 0.3, 0.43049351732812456),
    (0.5, 8.0, 0.27909280857099206),
    (0.5, 21.4, 0.096124467876723508),
    (0.5, 35.0, -0.057747757589458846),
    (0.5, 50.0, -0.029605831888924613),
    (2.0, 0.3, 0.011165861949063963),
    (2.0, 8.0, -0.11299172042407525),
    (2.0, 21.4, 0.048066886313482),
    (2.0, 35.0, 0.12935945088086261),
    (2.0, 50.0, -0.059712800794258821),
    (6.75, 0.3, 8.9524651311135469e-10),
    (6.75, 8.0, 0.33635864433736052),
    (6.75, 21.4, 0.014592211416067037),
    (6.75, 35.0, 0.087584728232965939),
    (6.75, 50.0, 0.023015511015066395),
    (10.0, 0.3, 1.5858465157002567e-15),
    (10.0, 8.0, 0.060767026774251156),
    (10.0, 21.4, 0.099691178722836278),
    (10.0, 35.0, 0.06354639134396284),
    (10.0, 50.0, -0.11384784914946939),
]

# mpmath tanh-sinh moments at 20 digits
CHITI_ORACLE = [
    (1.0, 2.0, 1.0, 2, 0.28209479177387814),
    (1.0, 2.0, 4.0, 2, 0.56418958354775629),
    (1.0, 5.0, 2.0, 2, 0.26154768820282158),
    (0.5, 1.0, 3.0, 3, 0.048717618152978798),
    (2.0, 3.0, 7.0, 4, 0.72524722274126541),
    (1.0, 1.5, 10.0, 5, 0.38984926502266843),
]


class TestBessel:
    @pytest.mark.parametrize("nu,expected", BESSEL_ZEROS)
    def test_first_zero(self, nu, expected):
        assert abs(bessel_first_zero(nu) - expected) <= 1e-11

    @pytest.mark.parametrize("nu,x,expected", BESSEL_VALUES)
    def test_values(self, nu, x, expected):
        assert abs(bessel_j(nu, x) - expected) <= 5e-10

    @given(st.floats(0.01, 50.0))
    def test_half_order_closed_form(self, x):
        exact = math.sqrt(2.0 / (math.pi * x)) * math.sin(x)
        assert abs(bessel_j(0.5, x) - exact) <= 5e-10

    @given(st.floats(0.01, 50.0))
    def test_three_half_order_closed_form(self, x):
        exact = math.sqrt(2.0 / (math.pi * x)) * (math.sin(x) / x - math.cos(x))
        assert abs(bessel_j(1.5, x) - exact) <= 5e-10

    def test_origin(self):
        assert bessel_j(0.0, 0.0) == 1.0
        assert bessel_j(2.5, 0.0) == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            bessel_j(-0.5, 1.0)
        with pytest.raises(ValueError):
            bessel_j(1.0, -0.1)
        with pytest.raises(ValueError):
            bessel_j(1.0, 50.5)
        with pytest.raises(ValueError):
            bessel_first_zero(10.5)
        with pytest.raises(ValueError):
            bessel_first_zero(-1.0)


class TestEuclideanConstant:
    @pytest.mark.parametrize("lam", [1.0, 2.0, 10.0])
    def test_payne_rayner_closed_form(self, lam):
        exact = math.sqrt(lam / (4.0 * math.pi))
        got = chiti_constant_euclidean(1.0, 2.0, lam, 2)
        assert abs(got - exact) <= 1e-8 * exact

    @pytest.mark.parametrize("p,q,lam,n,expected", CHITI_ORACLE)
    def test_oracle_values(self, p, q, lam, n, expected):
        got = chiti_constant_euclidean(p, q, lam, n)
        assert abs(got - expected) <= 1e-12 * expected

    def test_lambda_doubles_payne_rayner(self):
        one = chiti_constant_euclidean(1.0, 2.0, 1.0, 2)
        four = chiti_constant_euclidean(1.0, 2.0, 4.0, 2)
        assert four == pytest.approx(2.0 * one, rel=1e-14)

    @given(
        st.integers(2, 5),
        st.floats(0.3, 3.0),
        st.floats(1.0, 2.5),
        st.floats(0.2, 50.0),
    )
    def test_lambda_scaling_law(self, n, p, ratio, lam):
        q = p * ratio
        assume(n - 1.0 + q * (1.0 - 0.5 * n) > -0.99)
        base = chiti_constant_euclidean(p, q, 1.0, n)
        got = chiti_constant_euclidean(p, q, lam, n)
        expected = lam ** ((q - p) * n / (2.0 * p * q)) * base
        assert got == pytest.approx(expected, rel=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            chiti_constant_euclidean(0.0, 1.0, 1.0, 2)
        with pytest.raises(ValueError):
            chiti_constant_euclidean(2.0, 1.0, 1.0, 2)
        with pytest.raises(ValueError):
            chiti_constant_euclidean(1.0, 2.0, 0.0, 2)
        with pytest.raises(ValueError):
            chiti_constant_euclidean(1.0, 2.0, 1.0, 1)
        with pytest.raises(ValueError):
            chiti_constant_euclidean(1.0, 2.0, 1.0, 2.5)
        with pytest.raises(ValueError):
            # exponent n - 1 + q (1 - n/2) dips to -2: not integrable
            chiti_constant_euclidean(1.0, 5.0, 1.0, 4)


@pytest.fixture(scope="module")
def cap_as_domain():
    """Equality fixture: the cap profile itself plays the domain side."""
    spec = ManifoldSpec(n=2)
    pair = cap_eigenvalue(2, 1.0)
    u_star = volume_profile(pair, spec)
    return normalize_pair(u_star, pair, 1.0, spec), pair, spec


class TestNormalization:
    def test_equality_fixture_scale_is_one(self, cap_as_domain):
        cp, _, _ = cap_as_domain
        assert abs(cp.scale - 1.0) <= 1e-6

    def test_p_norm_identity(self, cap_as_domain):
        cp, pair, spec = cap_as_domain
        u_p = lp_norm_rearranged(cp.u_star, cp.p)
        v_p = profile_lp_norm(pair, cp.p)
        assert u_p == pytest.approx(spec.beta * cp.scale**cp.p * v_p, rel=1e-12)

    def test_scaled_sphere_converts_eigenvalue(self):
        spec = ManifoldSpec(n=2, r=0.8)
        pair = cap_eigenvalue(2, 1.0)
        u_star = volume_profile(pair, spec)
        cp = normalize_pair(u_star, pair, 1.0, spec)
        assert cp.lam == pair.lam / 0.8**2

    def test_eigenvalue_mismatch_rejected(self, cap_as_domain):
        _, pair, spec = cap_as_domain
        u_star = volume_profile(pair, spec)
        with pytest.raises(ValueError):
            normalize_pair(u_star, pair, 1.0, spec, lam=pair.lam + 1.0)
        cp = normalize_pair(u_star, pair, 1.0, spec, lam=pair.lam)
        assert cp.lam == pair.lam

    def test_cap_volume_claim_rejects_small_domain(self, cap_as_domain):
        _, pair, spec = cap_as_domain
        vol = cap_volume(spec, 1.0)
        small = RearrangedProfile(
            breaks=np.array([0.0, 0.5 * vol]), values=np.array([1.0])
        )
        with pytest.raises(ValueError):
            normalize_pair(small, pair, 1.0, spec)
        cp = normalize_pair(small, pair, 1.0, spec, claim_tol=math.inf)
        assert cp.domain_volume == 0.5 * vol

    def test_dimension_mismatch(self, cap_as_domain):
        _, pair, _ = cap_as_domain
        with pytest.raises(ValueError):
            normalize_pair(volume_profile(pair, ManifoldSpec(n=2)), pair, 1.0,
                           ManifoldSpec(n=3))

    def test_bad_exponent(self, cap_as_domain):
        _, pair, spec = cap_as_domain
        with pytest.raises(ValueError):
            normalize_pair(volume_profile(pair, spec), pair, 0.0, spec)


class TestReverseHolder:
    def test_equality_fixture_margins_vanish(self, cap_as_domain):
        cp, _, _ = cap_as_domain
        for q in (1.5, 2.0, 5.0):
            rep = reverse_holder_check(cp, q)
            assert rep.passed
            assert abs(rep.margin) <= 1e-6 * rep.rhs
            assert rep.metadata["equality"]

    def test_q_equal_p_margin_is_zero(self, cap_as_domain):
        cp, _, _ = cap_as_domain
        rep = reverse_holder_check(cp, cp.p)
        assert rep.margin == 0.0
        assert rep.passed

    def test_q_below_p_rejected(self, cap_as_domain):
        cp, _, _ = cap_as_domain
        with pytest.raises(ValueError):
            reverse_holder_check(cp, 0.5)

    def test_volume_bound_report(self, cap_as_domain):
        cp, _, spec = cap_as_domain
        rep = cap_volume_bound_report(cp)
        assert rep.passed
        assert rep.lhs == pytest.approx(cap_volume(spec, 1.0), rel=1e-12)
        assert rep.rhs == cp.domain_volume
        assert rep.metadata["lambda"] == cp.lam


class TestCrossings:
    def test_equality_fixture_has_none(self, cap_as_domain):
        cp, _, _ = cap_as_domain
        count, thetas = crossing_points(cp)
        assert count == 0
        assert thetas == []

    def test_linear_profile_crosses_once(self, cap_as_domain):
        # a straight line in the volume variable with the same p-norm must
        # cross the cap profile exactly once; position frozen by a run of
        # the merged-midpoint sampler
        _, pair, spec = cap_as_domain
        vol = cap_volume(spec, 1.0)
        s = np.linspace(0.0, vol, 65)
        vals = 1.0 - 0.25 * (s[:-1] + s[1:]) / vol
        lin = RearrangedProfile(breaks=s, values=vals)
        cp = normalize_pair(lin, pair, 1.0, spec)
        count, thetas = crossing_points(cp)
        assert count == 1
        assert 0.5 < thetas[0] < 0.8

    def test_wide_deadband_suppresses_crossings(self, cap_as_domain):
        _, pair, spec = cap_as_domain
        vol = cap_volume(spec, 1.0)
        s = np.linspace(0.0, vol, 65)
        vals = 1.0 - 0.25 * (s[:-1] + s[1:]) / vol
        cp = normalize_pair(RearrangedProfile(breaks=s, values=vals), pair, 1.0, spec)
        count, _ = crossing_points(cp, deadband=10.0)
        assert count == 0


class TestIntegroDifferential:
    THETAS = {2: math.pi / 3, 3: 1.2, 4: 0.9, 5: 1.1, 6: 1.3}

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_residual_nonnegative_up_to_noise(self, n):
        spec = ManifoldSpec(n=n)
        pair = cap_eigenvalue(n, self.THETAS[n])
        prof = volume_profile(pair, spec)
        res = integro_differential_residual(prof, pair.lam, spec)
        assert res.min() >= -1e-8

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_relative_residual_small_inside(self, n):
        # midpoint quotients cannot track the s^{2/n} cusp at the pole for
        # n >= 3, so the relative bound applies away from the first cells
        spec = ManifoldSpec(n=n)
        pair = cap_eigenvalue(n, self.THETAS[n])
        prof = volume_profile(pair, spec)
        res = integro_differential_residual(prof, pair.lam, spec)
        mids = 0.5 * (prof.breaks[:-1] + prof.breaks[1:])
        lhs = -(prof.values[1:] - prof.values[:-1]) / (mids[1:] - mids[:-1])
        rel = np.abs(res) / (res + lhs)
        interior = prof.breaks[1:-1] >= 1e-3 * prof.total_volume
        bound = 1e-6 if n == 2 else 1e-4
        assert rel[interior].max() <= bound

    def test_small_profiles_and_validation(self):
        spec = ManifoldSpec(n=2)
        tiny = RearrangedProfile(breaks=np.array([0.0, 1.0, 2.0]),
                                 values=np.array([2.0, 1.0]))
        assert integro_differential_residual(tiny, 1.0, spec).size == 0
        with pytest.raises(ValueError):
            integro_differential_residual(tiny, 0.0, spec)


class TestFlatLimit:
    @pytest.mark.parametrize(
        "p,q,n,theta1",
        [(1.0, 2.0, 2, 0.05), (1.0, 2.0, 3, 0.05), (0.5, 1.0, 3, 0.1),
         (2.0, 3.0, 4, 0.1)],
    )
    def test_small_caps_match_flat_constant(self, p, q, n, theta1):
        rep = flat_limit_consistency(p, q, n, theta1)
        assert rep.passed
        assert rep.lhs <= rep.rhs

    def test_gap_shrinks_with_radius(self):
        wide = flat_limit_consistency(1.0, 2.0, 2, 0.4)
        narrow = flat_limit_consistency(1.0, 2.0, 2, 0.05)
        assert narrow.lhs < wide.lhs

    def test_large_radius_rejected(self):
        with pytest.raises(ValueError):
            flat_limit_consistency(1.0, 2.0, 2, 0.5)


class TestReports:
    def test_make_report_margin(self):
        rep = make_report("demo", lhs=1.0, rhs=1.5, tolerance=0.1)
        assert rep.margin == 0.5
        assert rep.passed
        assert make_report("demo", 2.0, 1.5, 0.1).passed is False
        assert make_report("demo", 1.55, 1.5, 0.1).passed is True

    def test_inconsistent_flag_rejected(self):
        with pytest.raises(ValueError):
            VerificationReport(name="bad", lhs=2.0, rhs=1.0, margin=-1.0,
                               tolerance=0.0, passed=True)

    def test_to_dict_keys(self):
        rep = make_report("demo", 1.0, 2.0, 0.0, metadata={"k": 3})
        d = rep.to_dict()
        assert list(d) == ["name", "lhs", "rhs", "margin", "tolerance",
                           "pass", "metadata"]
        assert d["metadata"] == {"k": 3}

    def test_resolve_tolerances(self):
        tols = resolve_tolerances({"ineq": 0.5})
        assert tols["ineq"] == 0.5
        assert tols["claim"] == DEFAULT_TOLERANCES["claim"]
        with pytest.raises(ValueError):
            resolve_tolerances({"bogus": 1.0})
        with pytest.raises(ValueError):
            resolve_tolerances({"ineq": -1.0})
        with pytest.raises(ValueError):
            resolve_tolerances({"ineq": math.nan})
