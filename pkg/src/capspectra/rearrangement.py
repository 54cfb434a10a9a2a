"""Decreasing rearrangements of measured scalar fields.

A field sampled on cells of known measure is rearranged into the exact
right-continuous step function u*(s) on the volume interval
[0, vol(D)].  The distribution function uses the strict inequality
V(t) = |{u > t}| so that u* is the generalized inverse of V; plateaus in
the data become jumps of V and ties are resolved by merging equal values
into a single step, which makes the profile canonical under permutations
of the input.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sphere_geometry import ManifoldSpec, cap_volume_many, radius_from_volume, radius_from_volume_many


@dataclass(frozen=True)
class MeasuredSamples:
    """Nonnegative sample values with strictly positive cell measures."""

    values: np.ndarray
    measures: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        measures = np.asarray(self.measures, dtype=float)
        if values.shape != measures.shape or values.ndim != 1 or values.size == 0:
            raise ValueError("values and measures must be matching non-empty 1-d arrays")
        if not np.all(np.isfinite(values)) or np.any(values < 0.0):
            raise ValueError("values must be finite and >= 0")
        if not np.all(np.isfinite(measures)) or np.any(measures <= 0.0):
            raise ValueError("measures must be finite and > 0")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "measures", measures)

    @property
    def total_volume(self) -> float:
        return float(np.sum(self.measures))


@dataclass(frozen=True)
class RearrangedProfile:
    """Step profile of a decreasing rearrangement.

    ``breaks`` is the increasing array s_0 = 0 < s_1 < ... < s_K and
    ``values`` holds the value taken on [s_{k-1}, s_k); values are
    strictly decreasing because equal samples are merged.
    """

    breaks: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        breaks = np.asarray(self.breaks, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if breaks.ndim != 1 or values.ndim != 1 or breaks.size != values.size + 1:
            raise ValueError("breaks must have exactly one more entry than values")
        if breaks[0] != 0.0 or np.any(np.diff(breaks) <= 0.0):
            raise ValueError("breaks must start at 0 and increase strictly")
        if np.any(np.diff(values) >= 0.0):
            raise ValueError("step values must decrease strictly")
        object.__setattr__(self, "breaks", breaks)
        object.__setattr__(self, "values", values)

    @property
    def total_volume(self) -> float:
        return float(self.breaks[-1])

    def value_at(self, s):
        """Evaluate u*(s); right-continuous, zero for s >= total volume."""
        s = np.asarray(s, dtype=float)
        idx = np.searchsorted(self.breaks[1:], s, side="right")
        inside = idx < self.values.size
        out = np.where(inside, self.values[np.minimum(idx, self.values.size - 1)], 0.0)
        out = np.where(s < 0.0, self.values[0], out)
        return float(out) if out.ndim == 0 else out


def distribution_function(samples: MeasuredSamples, t: float) -> float:
    """V(t) = total measure of cells with value strictly above t."""
    return float(np.sum(samples.measures[samples.values > t]))


def decreasing_rearrangement(samples: MeasuredSamples) -> RearrangedProfile:
    """Exact sort-based rearrangement with equal values merged."""
    order = np.argsort(-samples.values, kind="stable")
    vals = samples.values[order]
    meas = samples.measures[order]
    # merge runs of identical values; boundaries where the value changes
    change = np.empty(vals.size, dtype=bool)
    change[0] = True
    np.not_equal(vals[1:], vals[:-1], out=change[1:])
    starts = np.flatnonzero(change)
    merged_vals = vals[starts]
    seg = np.add.reduceat(meas, starts)
    breaks = np.empty(starts.size + 1, dtype=float)
    breaks[0] = 0.0
    np.cumsum(seg, out=breaks[1:])
    return RearrangedProfile(breaks=breaks, values=merged_vals)


def merge_plateaus(profile: RearrangedProfile, rel_tol: float = 1e-8) -> RearrangedProfile:
    """Collapse runs of nearly equal steps into single plateaus.

    Iterative solvers break exact value ties at roundoff level, which
    turns genuinely flat regions (latitude rows of a pole-symmetric
    field) into thousands of micro-steps whose midpoints sweep the
    plateau span and defeat pointwise comparisons.  Consecutive steps
    staying within ``rel_tol`` of the run's first value, measured against
    the profile's value span, merge into one step carrying the
    width-weighted mean; integrals are preserved exactly.

    The anchored criterion keeps a noisy plateau in one piece (noise is
    far below the tolerance) while a genuine drop larger than the
    tolerance always starts a new step, so with ``rel_tol`` well above
    solver noise and below real level gaps the merge is unambiguous.
    """
    vals = profile.values
    if vals.size <= 1 or rel_tol <= 0.0:
        return profile
    span = float(vals[0] - vals[-1])
    if span <= 0.0:
        return profile
    tol = rel_tol * span
    widths = np.diff(profile.breaks).tolist()
    breaks_in = profile.breaks[1:].tolist()
    vals_in = vals.tolist()
    out_breaks = [0.0]
    out_vals: list[float] = []
    anchor = vals_in[0]
    acc_w = 0.0
    acc_vw = 0.0
    last_b = 0.0
    for v, w, b in zip(vals_in, widths, breaks_in):
        if anchor - v > tol and acc_w > 0.0:
            out_vals.append(acc_vw / acc_w)
            out_breaks.append(last_b)
            anchor = v
            acc_w = 0.0
            acc_vw = 0.0
        acc_w += w
        acc_vw += v * w
        last_b = b
    out_vals.append(acc_vw / acc_w)
    out_breaks.append(last_b)
    return RearrangedProfile(breaks=np.asarray(out_breaks),
                             values=np.asarray(out_vals))


def lp_norm_rearranged(profile: RearrangedProfile, p: float, upper: float | None = None) -> float:
    """Integral of (u*)^p over [0, upper]; exact on the step structure."""
    if p <= 0.0:
        raise ValueError("exponent p must be positive")
    if upper is None:
        upper = profile.total_volume
    if upper < 0.0:
        raise ValueError("upper limit must be >= 0")
    upper = min(upper, profile.total_volume)
    hi = np.minimum(profile.breaks[1:], upper)
    lo = np.minimum(profile.breaks[:-1], upper)
    widths = hi - lo
    keep = widths > 0.0
    return float(np.dot(profile.values[keep] ** p, widths[keep]))


def radialize(
    profile: RearrangedProfile,
    spec: ManifoldSpec,
    thetas: np.ndarray | None = None,
    num: int = 1025,
):
    """Radial rearrangement onto the model cap: u_star(theta) = u*(A(theta)).

    Without an explicit grid the profile is sampled on a uniform theta
    grid spanning [0, theta(vol)].  Returns (thetas, values).
    """
    if thetas is None:
        theta_max = radius_from_volume(spec, profile.total_volume)
        thetas = np.linspace(0.0, theta_max, num)
    else:
        thetas = np.asarray(thetas, dtype=float)
    values = profile.value_at(cap_volume_many(spec, thetas))
    return thetas, values


def integro_differential_residual(
    profile: RearrangedProfile,
    lam: float,
    spec: ManifoldSpec,
) -> np.ndarray:
    """Residuals of the rearranged eigenfunction inequality at step edges.

    For a profile built from a first Dirichlet eigenfunction with
    eigenvalue lam the difference quotient of u* between neighbouring
    interval midpoints is bounded by

        lam * (beta * omega_{n-1})^{-2} * sin(theta(s))^{2 - 2n} * int_0^s u*

    evaluated at the shared edge s.  Returns rhs - lhs per interior edge;
    nonnegative entries (up to discretization noise) mean the bound holds.
    Endpoints are excluded.
    """
    if lam <= 0.0:
        raise ValueError("eigenvalue must be positive")
    from .sphere_geometry import unit_sphere_measure

    breaks = profile.breaks
    vals = profile.values
    if vals.size < 3:
        return np.empty(0, dtype=float)
    mids = 0.5 * (breaks[:-1] + breaks[1:])
    edges = breaks[1:-1]
    slopes = (vals[1:] - vals[:-1]) / (mids[1:] - mids[:-1])
    lhs = -slopes
    widths = np.diff(breaks)
    cum = np.concatenate(([0.0], np.cumsum(vals * widths)))
    integral_at_edges = cum[1:-1]
    theta_edges = radius_from_volume_many(spec, edges)
    w = spec.beta * unit_sphere_measure(spec.n - 1)
    rhs = lam * w ** -2 * np.sin(theta_edges) ** (2 - 2 * spec.n) * integral_at_edges
    return rhs - lhs
