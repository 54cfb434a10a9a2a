"""Tests for the radial cap eigenvalue solver.

Reference values come from three independent sources: the hemisphere
closed form v = cos(theta) with lam = n,ic closed form
lam = (pi/theta1)^2 - 1 in dimension 3 (substitution u = v sin maps the
radial equation to u'' = -(lam + 1) u), and Legendre root values
P_nu(cos theta1) = 0 computed with mpmath at 25 digits for n = 2.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from capspectra import (
    ManifoldSpec,
    cap_eigenvalue,
    cap_radius_from_eigenvalue,
    cap_volume,
    lp_norm_rearranged,
    profile_lp_norm,
    volume_profile,
)
from capspectra.cap_spectral import NoZeroBeforeAntipodeError

# first Bessel zeros j_{n/2-1,1}, mpmath besseljzero at 25 digits
FLAT_LIMIT_ZEROS = {
    2: 2.4048255576957728,
    3: 3.1415926535897932,
    4: 3.8317059702075123,
    5: 4.4934094579090642,
    6: 5.1356223018406826,
}

# roots of P_nu(cos theta1) = 0 in nu, lam = nu (nu + 1); mpmath hyp2f1
LEGENDRE_LAMBDAS = [
    (math.pi / 3, 4.9360418654035268),
    (1.2, 3.6770524488196862),
    (2.0, 1.0932819084440955),
]


class TestHemisphere:
    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_eigenvalue_is_n(self, n):
        pair = cap_eigenvalue(n, math.pi / 2)
        assert abs(pair.lam - n) <= 1e-8

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_profile_is_cosine(self, n):
        pair = cap_eigenvalue(n, math.pi / 2)
        err = np.max(np.abs(pair.profile.values - np.cos(pair.profile.thetas)))
        assert err <= 1e-10


class TestFlatLimit:
    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_small_cap_approaches_disk(self, n):
        theta1 = 0.05
        pair = cap_eigenvalue(n, theta1)
        target = FLAT_LIMIT_ZEROS[n] ** 2
        assert abs(pair.lam * theta1**2 - target) <= 5e-3 * target


class TestClosedForms:
    @pytest.mark.parametrize(
        "theta1", [0.3, 0.6, math.pi / 3, 1.2, math.pi / 2, 2.0, 2.8]
    )
    def test_dimension_three(self, theta1):
        lam = cap_eigenvalue(3, theta1).lam
        exact = (math.pi / theta1) ** 2 - 1.0
        assert abs(lam - exact) <= 1e-8 * exact

    @pytest.mark.parametrize("theta1,expected", LEGENDRE_LAMBDAS)
    def test_dimension_two_legendre(self, theta1, expected):
        lam = cap_eigenvalue(2, theta1).lam
        assert abs(lam - expected) <= 1e-9 * expected

    @pytest.mark.parametrize(
        "n,theta1,pinned",
        [
            (4, 0.9, 16.1401929147426),
            (5, 1.1, 13.4195506227154),
            (6, 1.3, 10.8048890842200),
        ],
    )
    def test_higher_dimension_pins(self, n, theta1, pinned):
        # regression pins; the hemisphere, flat-limit, and n = 3 closed
        # forms anchor the method at both ends of the radius range
        lam = cap_eigenvalue(n, theta1).lam
        assert abs(lam - pinned) <= 1e-9 * pinned


class TestSolverStructure:
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_eigenvalue_decreases_in_radius(self, n):
        lams = [cap_eigenvalue(n, float(t)).lam for t in np.linspace(0.3, 2.9, 20)]
        assert all(a > b for a, b in zip(lams, lams[1:]))

    @pytest.mark.parametrize(
        "n,theta1", [(2, math.pi / 3), (3, 1.2), (4, 0.9), (6, 1.3)]
    )
    def test_profile_solves_equation(self, n, theta1):
        # -(sin^{n-1} v')' = lam sin^{n-1} v via flux differences on the
        # uniform grid; h^2 truncation keeps the relative residual small
        pair = cap_eigenvalue(n, theta1)
        th, v = pair.profile.thetas, pair.profile.values
        h = th[1] - th[0]
        flux = np.sin(th[:-1] + 0.5 * h) ** (n - 1) * np.diff(v) / h
        resid = np.diff(flux) / h + pair.lam * np.sin(th[1:-1]) ** (n - 1) * v[1:-1]
        scale = pair.lam * np.max(np.abs(np.sin(th[1:-1]) ** (n - 1) * v[1:-1]))
        assert np.max(np.abs(resid[16:])) <= 1e-6 * scale

    def test_profile_endpoints(self):
        pair = cap_eigenvalue(2, 1.2)
        assert pair.profile.values[0] == 1.0
        assert pair.profile.values[-1] == 0.0
        assert pair.profile.thetas[-1] == pytest.approx(1.2, abs=1e-12)
        assert pair.theta1 == 1.2

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_radius_round_trip(self, n):
        for theta1 in np.linspace(0.3, 2.5, 9):
            lam = cap_eigenvalue(n, float(theta1)).lam
            back = cap_radius_from_eigenvalue(n, lam).theta1
            assert abs(back - theta1) <= 1e-6

    def test_tiny_eigenvalue_has_no_cap(self):
        with pytest.raises(NoZeroBeforeAntipodeError):
            cap_radius_from_eigenvalue(2, 0.05)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            cap_eigenvalue(1, 1.0)
        with pytest.raises(ValueError):
            cap_eigenvalue(2, 0.0)
        with pytest.raises(ValueError):
            cap_eigenvalue(2, math.pi)
        with pytest.raises(ValueError):
            cap_radius_from_eigenvalue(2, -1.0)


class TestVolumeProfile:
    def test_step_structure(self):
        spec = ManifoldSpec(n=3)
        pair = cap_eigenvalue(3, 1.2)
        prof = volume_profile(pair, spec)
        assert prof.breaks[0] == 0.0
        assert np.all(np.diff(prof.breaks) > 0.0)
        assert np.all(np.diff(prof.values) < 0.0)
        vol = cap_volume(spec, 1.2)
        assert abs(prof.total_volume - vol) <= 1e-12 * vol

    def test_scaled_manifold_weights_breaks(self):
        unit = volume_profile(cap_eigenvalue(2, 1.0), ManifoldSpec(n=2))
        scaled = volume_profile(cap_eigenvalue(2, 1.0), ManifoldSpec(n=2, r=0.8))
        assert np.allclose(scaled.breaks, 0.64 * unit.breaks, rtol=1e-12)
        # value sampling inverts the scaled volume map, so only near-exact
        assert np.allclose(scaled.values, unit.values, rtol=1e-10, atol=1e-13)

    @pytest.mark.parametrize(
        "n,theta1", [(2, math.pi / 3), (3, 1.2), (4, 0.9)]
    )
    def test_norms_match_continuum(self, n, theta1):
        # step sums against the interpolant quadrature; measured gap 5e-7
        spec = ManifoldSpec(n=n)
        pair = cap_eigenvalue(n, theta1)
        prof = volume_profile(pair, spec)
        for p in (1.0, 2.0):
            a = profile_lp_norm(pair, p)
            b = lp_norm_rearranged(prof, p)
            assert abs(a - b) <= 2e-6 * a

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            volume_profile(cap_eigenvalue(3, 1.0), ManifoldSpec(n=2))
        with pytest.raises(ValueError):
            profile_lp_norm(cap_eigenvalue(3, 1.0), 1.0, spec=ManifoldSpec(n=2))
