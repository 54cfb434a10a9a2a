"""Dormand-Prince 4(5) integrator for the radial cap equation.

State y = (v, q) with q = sin^{n-1}(theta) * v', governed by

    v' = q * sin^{1-n}(theta)
    q' = -lam * sin^{n-1}(theta) * v

started from the regular series at a small offset from the pole.  The
first sign change of v is located inside the accepting step with a cubic
Hermite interpolant; accuracy of that root is far below the step error
because accepted steps near the zero are short.

Compiled with numba: the eigenvalue bisection performs tens of shots and
the per-shot budget is well under a millisecond this way.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

MAX_NODES = 80000

STATUS_ZERO = 0
STATUS_NO_ZERO = 1
STATUS_STEP_FAILURE = 2
STATUS_BAD_START = 3


@njit(cache=True)
def series_start(n: int, lam: float, theta: float):
    """Regular solution near the pole: v = 1 + a2 t^2 + a4 t^4 + O(t^6)."""
    a2 = -lam / (2.0 * n)
    a4 = lam * (3.0 * lam - 2.0 * (n - 1.0)) / (24.0 * n * (n + 2.0))
    v = 1.0 + a2 * theta * theta + a4 * theta ** 4
    vp = 2.0 * a2 * theta + 4.0 * a4 * theta ** 3
    q = math.sin(theta) ** (n - 1) * vp
    return v, q


@njit(cache=True)
def _hermite(tau: float, y0: float, d0: float, y1: float, d1: float) -> float:
    # cubic Hermite on [0, 1]; d are derivatives scaled by the step
    t2 = tau * tau
    t3 = t2 * tau
    return ((2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + tau) * d0
            + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * d1)


@njit(cache=True)
def integrate_radial(n: int, lam: float, theta_start: float, theta_cap: float,
                     rtol: float, atol: float):
    """Integrate until v crosses zero or theta reaches theta_cap.

    Returns (status, theta_zero, q_zero, count, th, vv, qq) where the
    arrays hold the accepted nodes up to and including the zero node.
    """
    th = np.empty(MAX_NODES)
    vv = np.empty(MAX_NODES)
    qq = np.empty(MAX_NODES)

    t = theta_start
    v, q = series_start(n, lam, theta_start)
    if v <= 0.0:
        return STATUS_BAD_START, 0.0, 0.0, 0, th, vv, qq

    th[0] = t
    vv[0] = v
    qq[0] = q
    count = 1

    # FSAL stage at the current point
    s = math.sin(t) ** (n - 1)
    k1v = q / s
    k1q = -lam * s * v

    h = min(1e-3, 0.25 * (theta_cap - theta_start), 0.5 / math.sqrt(lam + 1.0))
    if h <= 0.0:
        return STATUS_BAD_START, 0.0, 0.0, count, th, vv, qq

    while True:
        if t + h > theta_cap:
            h = theta_cap - t
        if h < 1e-14:
            # reached the cap (or step collapse)
            if theta_cap - t < 1e-12:
                return STATUS_NO_ZERO, 0.0, 0.0, count, th, vv, qq
            return STATUS_STEP_FAILURE, 0.0, 0.0, count, th, vv, qq

        # Dormand-Prince stages
        t2 = t + 0.2 * h
        y2v = v + h * 0.2 * k1v
        y2q = q + h * 0.2 * k1q
        s = math.sin(t2) ** (n - 1)
        k2v = y2q / s
        k2q = -lam * s * y2v

        t3 = t + 0.3 * h
        y3v = v + h * (3.0 / 40.0 * k1v + 9.0 / 40.0 * k2v)
        y3q = q + h * (3.0 / 40.0 * k1q + 9.0 / 40.0 * k2q)
        s = math.sin(t3) ** (n - 1)
        k3v = y3q / s
        k3q = -lam * s * y3v

        t4 = t + 0.8 * h
        y4v = v + h * (44.0 / 45.0 * k1v - 56.0 / 15.0 * k2v + 32.0 / 9.0 * k3v)
        y4q = q + h * (44.0 / 45.0 * k1q - 56.0 / 15.0 * k2q + 32.0 / 9.0 * k3q)
        s = math.sin(t4) ** (n - 1)
        k4v = y4q / s
        k4q = -lam * s * y4v

        t5 = t + 8.0 / 9.0 * h
        y5v = v + h * (19372.0 / 6561.0 * k1v - 25360.0 / 2187.0 * k2v
                       + 64448.0 / 6561.0 * k3v - 212.0 / 729.0 * k4v)
        y5q = q + h * (19372.0 / 6561.0 * k1q - 25360.0 / 2187.0 * k2q
                       + 64448.0 / 6561.0 * k3q - 212.0 / 729.0 * k4q)
        s = math.sin(t5) ** (n - 1)
        k5v = y5q / s
        k5q = -lam * s * y5v

        t6 = t + h
        y6v = v + h * (9017.0 / 3168.0 * k1v - 355.0 / 33.0 * k2v
                       + 46732.0 / 5247.0 * k3v + 49.0 / 176.0 * k4v
                       - 5103.0 / 18656.0 * k5v)
        y6q = q + h * (9017.0 / 3168.0 * k1q - 355.0 / 33.0 * k2q
                       + 46732.0 / 5247.0 * k3q + 49.0 / 176.0 * k4q
                       - 5103.0 / 18656.0 * k5q)
        s = math.sin(t6) ** (n - 1)
        k6v = y6q / s
        k6q = -lam * s * y6v

        ynv = v + h * (35.0 / 384.0 * k1v + 500.0 / 1113.0 * k3v + 125.0 / 192.0 * k4v
                       - 2187.0 / 6784.0 * k5v + 11.0 / 84.0 * k6v)
        ynq = q + h * (35.0 / 384.0 * k1q + 500.0 / 1113.0 * k3q + 125.0 / 192.0 * k4q
                       - 2187.0 / 6784.0 * k5q + 11.0 / 84.0 * k6q)
        s = math.sin(t6) ** (n - 1)
        k7v = ynq / s
        k7q = -lam * s * ynv

        errv = h * (71.0 / 57600.0 * k1v - 71.0 / 16695.0 * k3v + 71.0 / 1920.0 * k4v
                    - 17253.0 / 339200.0 * k5v + 22.0 / 525.0 * k6v - 1.0 / 40.0 * k7v)
        errq = h * (71.0 / 57600.0 * k1q - 71.0 / 16695.0 * k3q + 71.0 / 1920.0 * k4q
                    - 17253.0 / 339200.0 * k5q + 22.0 / 525.0 * k6q - 1.0 / 40.0 * k7q)
        scv = atol + rtol * max(abs(v), abs(ynv))
        scq = atol + rtol * max(abs(q), abs(ynq))
        enorm = math.sqrt(0.5 * ((errv / scv) ** 2 + (errq / scq) ** 2))

        if enorm <= 1.0:
            # accepted
            if ynv <= 0.0:
                # first zero inside (t, t + h]
                d0 = h * k1v
                d1 = h * k7v
                lo_tau, hi_tau = 0.0, 1.0
                for _ in range(80):
                    mid = 0.5 * (lo_tau + hi_tau)
                    if _hermite(mid, v, d0, ynv, d1) > 0.0:
                        lo_tau = mid
                    else:
                        hi_tau = mid
                tau = 0.5 * (lo_tau + hi_tau)
                tz = t + tau * h
                qz = _hermite(tau, q, h * k1q, ynq, h * k7q)
                if count < MAX_NODES:
                    th[count] = tz
                    vv[count] = 0.0
                    qq[count] = qz
                    count += 1
                return STATUS_ZERO, tz, qz, count, th, vv, qq
            t = t6
            v, q = ynv, ynq
            k1v, k1q = k7v, k7q
            if count >= MAX_NODES:
                return STATUS_STEP_FAILURE, 0.0, 0.0, count, th, vv, qq
            th[count] = t
            vv[count] = v
            qq[count] = q
            count += 1
            if t >= theta_cap:
                return STATUS_NO_ZERO, 0.0, 0.0, count, th, vv, qq
            fac = 5.0 if enorm == 0.0 else min(5.0, max(0.2, 0.9 * enorm ** -0.2))
            h *= fac
        else:
            h *= max(0.2, 0.9 * enorm ** -0.2)
