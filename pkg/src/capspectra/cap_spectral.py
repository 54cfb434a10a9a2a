"""First Dirichlet eigenpairs of geodesic caps on the unit n-sphere.

The radial problem

    -(sin^{n-1}(theta) v')' = lam * sin^{n-1}(theta) * v,   v(theta1) = 0,

with v regular at the pole is solved by shooting: integrate from a series
start near the pole and locate the first zero of v.  The zero position is
strictly decreasing in lam, which drives a bisection for the eigenvalue of
a prescribed cap radius.  Known closed forms: v = cos(theta) with lam = n
on the hemisphere, and the flat small-cap limit lam * theta1^2 ->
j_{n/2-1,1}^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

from . import _radial_ode, quadrature
from .rearrangement import RearrangedProfile
from .sphere_geometry import (
    ManifoldSpec,
    cap_volume_many,
    radius_from_volume_many,
    unit_sphere_measure,
)

# Integration starts at the series offset and never continues past
# pi - POLE_GAP; eigenvalue queries reject radii above ANTIPODE_LIMIT.
SERIES_START = 1e-4
POLE_GAP = 1e-6
ANTIPODE_LIMIT = math.pi - 1e-3

_RK_TOL = 1e-11
_LAMBDA_BISECTION_TOL = 1e-10
_PROFILE_NUM = 2049


class NoZeroBeforeAntipodeError(RuntimeError):
    """The shot solution stayed positive all the way to the antipode."""


@dataclass(frozen=True)
class RadialProfile:
    """Samples of a radial function on an increasing theta grid.

    Node derivatives are optional; when present they enable a Hermite
    interpolant with exact node data instead of a shape-fitted one.
    """

    thetas: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray | None = None

    def __post_init__(self) -> None:
        thetas = np.asarray(self.thetas, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if thetas.shape != values.shape or thetas.ndim != 1 or thetas.size < 2:
            raise ValueError("profile needs matching 1-d theta/value arrays")
        if np.any(np.diff(thetas) <= 0.0):
            raise ValueError("theta grid must increase strictly")
        if not np.all(np.isfinite(values)):
            raise ValueError("profile values must be finite")
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "values", values)
        if self.derivatives is not None:
            derivs = np.asarray(self.derivatives, dtype=float)
            if derivs.shape != thetas.shape or not np.all(np.isfinite(derivs)):
                raise ValueError("derivatives must match the grid and be finite")
            object.__setattr__(self, "derivatives", derivs)


@dataclass(frozen=True)
class CapEigenpair:
    """Cap radius, eigenvalue and normalized radial profile (v(0) = 1)."""

    n: int
    theta1: float
    lam: float
    profile: RadialProfile

    def __post_init__(self) -> None:
        if self.lam <= 0.0:
            raise ValueError("eigenvalue must be positive")
        if not (0.0 < self.theta1 < math.pi):
            raise ValueError("cap radius must lie in (0, pi)")

    def interpolator(self):
        """Cubic interpolant of the profile.

        Hermite with the stored node derivatives when available (exact
        node data, fourth order); monotone PCHIP otherwise.
        """
        if self.profile.derivatives is not None:
            return CubicHermiteSpline(self.profile.thetas, self.profile.values,
                                      self.profile.derivatives)
        return PchipInterpolator(self.profile.thetas, self.profile.values)


def _first_zero(n: int, lam: float) -> float | None:
    """Position of the first zero of the shot solution, or None."""
    status, tz, _, _, _, _, _ = _radial_ode.integrate_radial(
        n, lam, SERIES_START, math.pi - POLE_GAP, _RK_TOL, _RK_TOL)
    if status == _radial_ode.STATUS_ZERO:
        return tz
    if status == _radial_ode.STATUS_NO_ZERO:
        return None
    if status == _radial_ode.STATUS_BAD_START:
        raise ValueError("lam too large for the series start offset")
    raise RuntimeError("radial integration failed to advance")


_REFINE_RTOL = 1e-12
_REFINE_ATOL = (1e-14, 0.0)


def _radial_rhs(n: int, lam: float):
    def rhs(t, y):
        s = math.sin(t) ** (n - 1)
        return (y[1] / s, -lam * s * y[0])

    return rhs


def _refined_zero(n: int, lam: float, rough_zero: float) -> float:
    """First zero of the shot solution, polished by a high-order pass.

    The fast kernel locates the zero with a cubic interpolant inside one
    accepted step, good to ~1e-10; pinning the profile end there leaves a
    value kink that second differences amplify.  An event-terminated
    DOP853 run recovers the zero to integrator accuracy.
    """
    v0, q0 = _radial_ode.series_start(n, lam, SERIES_START)

    def crossing(t, y):
        return y[0]

    crossing.terminal = True
    crossing.direction = -1.0
    upper = min(rough_zero + 1e-6, math.pi - POLE_GAP)
    sol = solve_ivp(_radial_rhs(n, lam), (SERIES_START, upper), (v0, q0),
                    method="DOP853", events=crossing,
                    rtol=_REFINE_RTOL, atol=np.array(_REFINE_ATOL))
    if not sol.success:
        raise RuntimeError(f"radial refinement failed: {sol.message}")
    if sol.t_events[0].size == 0:
        raise RuntimeError("refined integration lost the sign change")
    return float(sol.t_events[0][0])


def _refined_profile(n: int, lam: float, grid: np.ndarray):
    """Values and derivatives of the shot solution at the grid nodes.

    The fast fixed-order kernel only reports its accepted steps, and
    interpolating between them leaves O(step^4) wiggle that difference
    quotients and finite-difference residuals on the uniform grid would
    amplify.  Re-integrate once with a high-order method evaluated at the
    nodes themselves: series below the start offset, DOP853 beyond it.
    """
    values = np.empty_like(grid)
    derivs = np.empty_like(grid)
    values[0] = 1.0
    derivs[0] = 0.0
    near = (grid > 0.0) & (grid <= SERIES_START)
    for i in np.nonzero(near)[0]:
        t = float(grid[i])
        v, q = _radial_ode.series_start(n, lam, t)
        values[i] = v
        derivs[i] = q / math.sin(t) ** (n - 1)
    far = grid > SERIES_START
    if np.any(far):
        v0, q0 = _radial_ode.series_start(n, lam, SERIES_START)
        sol = solve_ivp(_radial_rhs(n, lam), (SERIES_START, float(grid[-1])),
                        (v0, q0), method="DOP853", t_eval=grid[far],
                        rtol=_REFINE_RTOL, atol=np.array(_REFINE_ATOL))
        if not sol.success:
            raise RuntimeError(f"radial refinement failed: {sol.message}")
        values[far] = sol.y[0]
        derivs[far] = sol.y[1] / np.sin(grid[far]) ** (n - 1)
    return values, derivs


def shoot(n: int, lam: float, num: int = _PROFILE_NUM):
    """Integrate the radial equation and locate the first zero of v.

    Returns (first_zero, profile) with the profile sampled on a uniform
    grid over [0, first_zero], node values and derivatives from a refining
    re-integration at the nodes.  Raises NoZeroBeforeAntipodeError when v
    stays positive on (0, pi - POLE_GAP).
    """
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise ValueError("dimension n must be an integer >= 2")
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    status, tz, _, _, _, _, _ = _radial_ode.integrate_radial(
        int(n), float(lam), SERIES_START, math.pi - POLE_GAP, _RK_TOL, _RK_TOL)
    if status == _radial_ode.STATUS_NO_ZERO:
        raise NoZeroBeforeAntipodeError(
            f"no zero of v before theta = pi - {POLE_GAP:g} at lam = {lam:g}")
    if status == _radial_ode.STATUS_BAD_START:
        raise ValueError("lam too large for the series start offset")
    if status != _radial_ode.STATUS_ZERO:
        raise RuntimeError("radial integration failed to advance")

    tz = _refined_zero(int(n), float(lam), tz)
    grid = np.linspace(0.0, tz, num)
    values, derivs = _refined_profile(int(n), float(lam), grid)
    values[0] = 1.0
    values[-1] = 0.0
    return tz, RadialProfile(thetas=grid, values=values, derivatives=derivs)


def cap_eigenvalue(n: int, theta1: float, num: int = _PROFILE_NUM) -> CapEigenpair:
    """First Dirichlet eigenvalue of the cap of radius theta1.

    Bisection on the first-zero position, which is monotone in lam, down
    to 1e-10 in the eigenvalue (relative floor for large lam).
    """
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise ValueError("dimension n must be an integer >= 2")
    if not (0.0 < theta1 <= ANTIPODE_LIMIT):
        raise ValueError(f"cap radius must lie in (0, {ANTIPODE_LIMIT:.6f}]")
    n = int(n)
    from .chiti import bessel_first_zero  # local import; chiti depends on us too

    guess = (bessel_first_zero(0.5 * n - 1.0) / theta1) ** 2
    lo, hi = 0.25 * guess, 4.0 * guess
    # widen until the zero positions straddle theta1
    for _ in range(80):
        z = _first_zero(n, lo)
        if z is None or z > theta1:
            break
        lo *= 0.25
    else:
        raise RuntimeError("failed to bracket the eigenvalue from below")
    for _ in range(80):
        z = _first_zero(n, hi)
        if z is not None and z < theta1:
            break
        hi *= 4.0
    else:
        raise RuntimeError("failed to bracket the eigenvalue from above")
    while hi - lo > _LAMBDA_BISECTION_TOL * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        z = _first_zero(n, mid)
        if z is None or z > theta1:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    _, profile = shoot(n, lam, num=num)
    # pin the grid to the requested radius; the zero matched it to ~1e-10
    grid = np.linspace(0.0, theta1, profile.thetas.size)
    profile = RadialProfile(thetas=grid, values=profile.values,
                            derivatives=profile.derivatives)
    return CapEigenpair(n=n, theta1=theta1, lam=lam, profile=profile)


def cap_radius_from_eigenvalue(n: int, lam: float, num: int = _PROFILE_NUM) -> CapEigenpair:
    """Cap radius whose first Dirichlet eigenvalue equals lam."""
    tz, profile = shoot(n, lam, num=num)
    if tz > ANTIPODE_LIMIT:
        raise NoZeroBeforeAntipodeError(
            f"eigenvalue {lam:g} corresponds to a cap within {math.pi - tz:.2e} "
            "of the antipode")
    return CapEigenpair(n=int(n), theta1=tz, lam=float(lam), profile=profile)


def profile_lp_norm(pair: CapEigenpair, p: float, spec: ManifoldSpec | None = None) -> float:
    """Unweighted cap integral of v^p on the unit sphere.

    Computes omega_{n-1} * integral_0^theta1 v(theta)^p sin^{n-1}(theta)
    dtheta by panel quadrature on the monotone cubic interpolant.  The
    beta weight of a comparison manifold is applied by the caller.
    """
    if p <= 0.0:
        raise ValueError("exponent p must be positive")
    if spec is not None and spec.n != pair.n:
        raise ValueError("manifold dimension does not match the eigenpair")
    interp = pair.interpolator()
    nm1 = pair.n - 1

    def integrand(t):
        return np.clip(interp(t), 0.0, None) ** p * np.sin(t) ** nm1

    raw = quadrature.cumulative(integrand, pair.profile.thetas)[-1]
    return unit_sphere_measure(pair.n - 1) * float(raw)


def volume_profile(pair: CapEigenpair, spec: ManifoldSpec) -> RearrangedProfile:
    """Cap eigenfunction as a step profile in the volume coordinate.

    Breaks are s_k = A(theta_k) over the profile grid; the value on each
    interval is v sampled at the interval's volume midpoint, so difference
    quotients across neighbouring steps track -dv*/ds even in the first
    cells at the pole, where A is quadratic and the theta midpoint sits
    far from the volume midpoint.
    """
    if spec.n != pair.n:
        raise ValueError("manifold dimension does not match the eigenpair")
    thetas = pair.profile.thetas
    breaks = cap_volume_many(spec, thetas)
    breaks[0] = 0.0
    interp = pair.interpolator()
    mids = radius_from_volume_many(spec, 0.5 * (breaks[:-1] + breaks[1:]))
    vals = np.asarray(interp(mids), dtype=float)
    # enforce strict decrease; merged flats only arise from fp ties
    keep_breaks = [0.0]
    keep_vals = []
    last = math.inf
    for b, v in zip(breaks[1:], vals):
        if v < last:
            keep_vals.append(v)
            keep_breaks.append(float(b))
            last = v
        else:
            keep_breaks[-1] = float(b)
    return RearrangedProfile(breaks=np.asarray(keep_breaks),
                             values=np.asarray(keep_vals))
