"""Geodesic-cap geometry on the model sphere.

Caps are measured on the unit round sphere and weighted by the volume
fraction ``beta`` of the comparison manifold.  The polar radius ``theta``
and the enclosed volume are used interchangeably through the pair of maps

    A(theta) = beta * omega_{n-1} * integral_0^theta sin^{n-1} tau dtau
    theta(s) = A^{-1}(s)

where ``omega_{n-1}`` is the measure of the unit (n-1)-sphere.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import quadrature

# Plain floats with op-level validation; 0 <= theta <= pi and
# 0 <= s <= beta * omega_n.
CapRadius = float
VolumeCoordinate = float

_VOLUME_TABLE_NODES = 8193


class Admissibility(enum.Enum):
    """How the comparison constant beta was justified."""

    SCALED_SPHERE = "scaled_sphere"
    ASSUMED_ADMISSIBLE = "assumed_admissible"


def unit_sphere_measure(k: int) -> float:
    """Measure omega_k of the unit k-sphere, via log-gamma for stability."""
    if not isinstance(k, (int, np.integer)) or k < 0:
        raise ValueError("k must be a non-negative integer")
    return math.exp(math.log(2.0) + 0.5 * (k + 1) * math.log(math.pi)
                    - math.lgamma(0.5 * (k + 1)))


@dataclass(frozen=True)
class ManifoldSpec:
    """Dimension and volume data of the manifold being compared to caps.

    ``beta`` is Vol(M) / omega_n.  For a round sphere of radius r <= 1 it
    equals r**n and the Ricci lower bound holds by scaling; any other beta
    must be declared ASSUMED_ADMISSIBLE and is accepted for comparison
    arithmetic only.
    """

    n: int
    r: float = 1.0
    beta: float | None = None
    admissibility: Admissibility = Admissibility.SCALED_SPHERE

    def __post_init__(self) -> None:
        if not isinstance(self.n, (int, np.integer)) or self.n < 2:
            raise ValueError("dimension n must be an integer >= 2")
        if self.admissibility is Admissibility.SCALED_SPHERE:
            if not (0.0 < self.r <= 1.0):
                raise ValueError("scaled sphere requires 0 < r <= 1")
            derived = self.r ** self.n
            if self.beta is None:
                object.__setattr__(self, "beta", derived)
            elif not math.isclose(self.beta, derived, rel_tol=1e-12):
                raise ValueError("beta inconsistent with r**n for a scaled sphere")
        else:
            if self.beta is None or not (0.0 < self.beta <= 1.0):
                raise ValueError("assumed-admissible spec requires 0 < beta <= 1")

    @classmethod
    def scaled_sphere(cls, n: int, r: float = 1.0) -> "ManifoldSpec":
        return cls(n=n, r=r)

    @classmethod
    def assumed_admissible(cls, n: int, beta: float) -> "ManifoldSpec":
        return cls(n=n, r=1.0, beta=beta,
                   admissibility=Admissibility.ASSUMED_ADMISSIBLE)

    @property
    def total_volume(self) -> float:
        """beta * omega_n, the volume budget of the manifold."""
        return self.beta * unit_sphere_measure(self.n)

    def to_dict(self) -> dict:
        """Defining keys only, so the output parses back unchanged."""
        out: dict = {"n": int(self.n)}
        if self.admissibility is Admissibility.SCALED_SPHERE:
            out["r"] = float(self.r)
        else:
            out["beta"] = float(self.beta)
        out["admissibility"] = self.admissibility.value
        return out


def _sin_pow(n: int):
    def f(t):
        return np.sin(t) ** (n - 1)
    return f


@lru_cache(maxsize=64)
def _volume_table(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Cached (theta, unweighted integral of sin^{n-1}) table on [0, pi]."""
    thetas = np.linspace(0.0, math.pi, _VOLUME_TABLE_NODES)
    vals = quadrature.cumulative(_sin_pow(n), thetas)
    return thetas, vals


def cap_volume(spec: ManifoldSpec, theta: float) -> float:
    """Weighted volume A(theta) of the polar cap of radius theta."""
    if not (0.0 <= theta <= math.pi):
        raise ValueError("cap radius must lie in [0, pi]")
    if theta == 0.0:
        return 0.0
    raw = quadrature.integrate(_sin_pow(spec.n), 0.0, theta, rel_tol=1e-13)
    return spec.beta * unit_sphere_measure(spec.n - 1) * raw


def cap_volume_many(spec: ManifoldSpec, thetas: np.ndarray) -> np.ndarray:
    """Vectorized A(theta) via the cached cumulative table plus local panels.

    Accuracy is limited by the table refinement step (one extra panel per
    query), which keeps it well below 1e-12 relative for interior radii.
    """
    thetas = np.asarray(thetas, dtype=float)
    if np.any(thetas < 0.0) or np.any(thetas > math.pi):
        raise ValueError("cap radii must lie in [0, pi]")
    tgrid, tvals = _volume_table(spec.n)
    idx = np.clip(np.searchsorted(tgrid, thetas, side="right") - 1, 0, tgrid.size - 2)
    base_t = tgrid[idx]
    base_v = tvals[idx]
    # one 15-point panel from the table node up to each query point
    half = 0.5 * (thetas - base_t)
    mid = base_t + half
    pts = mid[:, None] + half[:, None] * quadrature._NODES[None, :]
    f = _sin_pow(spec.n)
    corr = half * (f(pts) @ quadrature._WEIGHTS)
    return spec.beta * unit_sphere_measure(spec.n - 1) * (base_v + corr)


def cap_boundary_area(spec: ManifoldSpec, theta: float):
    """Unweighted boundary measure L(theta) = omega_{n-1} sin^{n-1}(theta).

    Satisfies A'(theta) = beta * L(theta).
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0.0) or np.any(theta > math.pi):
        raise ValueError("cap radius must lie in [0, pi]")
    out = unit_sphere_measure(spec.n - 1) * np.sin(theta) ** (spec.n - 1)
    return float(out) if out.ndim == 0 else out


def radius_from_volume(spec: ManifoldSpec, s: float) -> float:
    """Invert A: find theta with A(theta) = s.

    Bracketed bisection to 1e-12 in theta from the cached table, then two
    Newton steps with A' = beta * L.
    """
    total = spec.total_volume
    if not (-1e-12 * total <= s <= total * (1.0 + 1e-12)):
        raise ValueError("volume outside [0, beta * omega_n]")
    s = min(max(s, 0.0), total)
    if s == 0.0:
        return 0.0
    if s == total:
        return math.pi
    tgrid, tvals = _volume_table(spec.n)
    scale = spec.beta * unit_sphere_measure(spec.n - 1)
    target = s / scale
    k = int(np.searchsorted(tvals, target, side="right") - 1)
    k = min(max(k, 0), tgrid.size - 2)
    lo, hi = float(tgrid[k]), float(tgrid[k + 1])
    flo = float(tvals[k]) - target
    f = _sin_pow(spec.n)
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        fmid = flo + quadrature.integrate(f, lo, mid, rel_tol=1e-13)
        if fmid > 0.0:
            hi = mid
        else:
            lo, flo = mid, fmid
    theta = 0.5 * (lo + hi)
    for _ in range(2):
        slope = math.sin(theta) ** (spec.n - 1)
        if slope < 1e-14:
            break
        resid = quadrature.integrate(f, 0.0, theta, rel_tol=1e-13) - target
        theta -= resid / slope
        theta = min(max(theta, 0.0), math.pi)
    return theta


def radius_from_volume_many(spec: ManifoldSpec, s: np.ndarray) -> np.ndarray:
    """Vectorized inverse of A.

    Table interpolation seeds Newton iterations; near the poles, where
    the table seed is poor because A is flat, the seed comes from the
    leading-order expansion A ~ beta omega theta^n / n instead.
    """
    s = np.asarray(s, dtype=float)
    total = spec.total_volume
    if np.any(s < -1e-12 * total) or np.any(s > total * (1.0 + 1e-12)):
        raise ValueError("volume outside [0, beta * omega_n]")
    scale = spec.beta * unit_sphere_measure(spec.n - 1)
    target = np.clip(s, 0.0, total) / scale
    tgrid, tvals = _volume_table(spec.n)
    theta = np.interp(target, tvals, tgrid)
    total_raw = float(tvals[-1])
    near0 = target < tvals[8]
    if near0.any():
        theta = np.where(near0, (spec.n * target) ** (1.0 / spec.n), theta)
    near_pi = target > total_raw - tvals[8]
    if near_pi.any():
        gap = np.maximum(total_raw - target, 0.0)
        theta = np.where(near_pi, math.pi - (spec.n * gap) ** (1.0 / spec.n), theta)
    for _ in range(3):
        slope = np.sin(theta) ** (spec.n - 1)
        ok = slope > 1e-14
        resid = cap_volume_many(spec, theta) / scale - target
        theta = np.where(ok, theta - np.where(ok, resid, 0.0) / np.where(ok, slope, 1.0), theta)
        theta = np.clip(theta, 0.0, math.pi)
    return theta
