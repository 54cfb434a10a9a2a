"""Quadrature primitives shared by the geometry, spectral, and torsion
modules.

``integrate`` is adaptive composite Gauss-Legendre: panels use a fixed
15-point rule, the error estimate for a panel is the difference against
its two half-panels, and panels are bisected until the estimate clears
the requested tolerance.  ``tanh_sinh`` is double-exponential quadrature
for integrands with algebraic endpoint singularities (in value
derivatives, e.g. fractional powers of a function vanishing at an
endpoint), where bisection stalls against the roundoff floor instead of
converging.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(15)
_NODES7, _WEIGHTS7 = np.polynomial.legendre.leggauss(7)

_MAX_DEPTH = 52


def _panel(f: Callable[[np.ndarray], np.ndarray], a: float, b: float) -> float:
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    return half * float(np.dot(_WEIGHTS, np.asarray(f(mid + half * _NODES), dtype=float)))


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    rel_tol: float = 1e-12,
    abs_tol: float = 0.0,
) -> float:
    """Integrate a vectorized callable over [a, b] by adaptive bisection.

    Targets ``|error| <= max(abs_tol, rel_tol * |integral|)``.  The
    integrand must accept numpy arrays.
    """
    if b == a:
        return 0.0
    if b < a:
        return -integrate(f, b, a, rel_tol=rel_tol, abs_tol=abs_tol)
    whole = _panel(f, a, b)
    scale = max(abs(whole), abs_tol)
    total = 0.0
    # stack of (a, b, coarse estimate, depth)
    stack = [(a, b, whole, 0)]
    while stack:
        lo, hi, coarse, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left = _panel(f, lo, mid)
        right = _panel(f, mid, hi)
        fine = left + right
        err = abs(fine - coarse)
        # local share of the global tolerance, floor keeps recursion finite
        tol_local = max(rel_tol * max(scale, abs(fine)), abs_tol) * (hi - lo) / (b - a)
        if err <= max(tol_local, 1e-300) or depth >= _MAX_DEPTH:
            if not np.isfinite(fine):
                raise ArithmeticError(
                    f"non-finite panel estimate on [{lo:g}, {hi:g}]"
                )
            total += fine
        else:
            stack.append((lo, mid, left, depth + 1))
            stack.append((mid, hi, right, depth + 1))
        scale = max(scale, abs(total))
    return total


_TS_CUTOFF = 4.0
_TS_MAX_LEVEL = 12


def tanh_sinh(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    rel_tol: float = 1e-13,
    abs_tol: float = 0.0,
) -> float:
    """Integrate a bounded vectorized callable over [a, b].

    Substitutes x = mid + half * tanh(pi/2 * sinh(t)) and applies the
    trapezoid rule in t, halving the step until two levels agree to the
    requested tolerance.  Endpoint behaviour like (b - x)^alpha with
    alpha > -1 costs nothing extra; nodes that round onto the endpoints
    are dropped, which is safe because their weights are below 1e-30.
    """
    if b == a:
        return 0.0
    if b < a:
        return -tanh_sinh(f, b, a, rel_tol=rel_tol, abs_tol=abs_tol)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)

    def row(ts: np.ndarray) -> float:
        u = 0.5 * math.pi * np.sinh(ts)
        x = mid + half * np.tanh(u)
        w = half * 0.5 * math.pi * np.cosh(ts) / np.cosh(u) ** 2
        keep = (x > a) & (x < b) & (w > 0.0)
        if not np.any(keep):
            return 0.0
        vals = np.asarray(f(x[keep]), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ArithmeticError("integrand produced non-finite values")
        return float(np.dot(w[keep], vals))

    h = 1.0
    total = h * row(np.arange(-int(_TS_CUTOFF), int(_TS_CUTOFF) + 1) * h)
    for _ in range(_TS_MAX_LEVEL):
        h *= 0.5
        odd = np.arange(1, int(_TS_CUTOFF / h) + 1, 2) * h
        refined = 0.5 * total + h * row(np.concatenate((-odd, odd)))
        done = abs(refined - total) <= max(rel_tol * abs(refined), abs_tol)
        total = refined
        if done:
            return total
    raise ArithmeticError("tanh-sinh quadrature did not converge")


def cumulative(
    f: Callable[[np.ndarray], np.ndarray],
    grid: np.ndarray,
    order: int = 15,
) -> np.ndarray:
    """Cumulative integral of f along an increasing grid.

    Returns an array c with c[0] = 0 and c[k] = integral from grid[0] to
    grid[k], using one fixed Gauss-Legendre panel per interval.  Intended
    for fine grids where a single panel per interval is already far below
    roundoff.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid must be a 1-d array with at least two nodes")
    nodes, weights = (_NODES, _WEIGHTS) if order == 15 else (_NODES7, _WEIGHTS7)
    lo = grid[:-1]
    half = 0.5 * np.diff(grid)
    mid = lo + half
    # (intervals, order) evaluation grid in one call
    pts = mid[:, None] + half[:, None] * nodes[None, :]
    vals = np.asarray(f(pts.ravel()), dtype=float).reshape(pts.shape)
    per = half * (vals @ weights)
    out = np.empty(grid.size, dtype=float)
    out[0] = 0.0
    np.cumsum(per, out=out[1:])
    return out
