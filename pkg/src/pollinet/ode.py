"""Positivity-preserving Dormand-Prince 5(4) integrator.

Written for population models whose vector field keeps the nonnegative orthant
invariant.  A step whose result leaves the orthant is rejected and retried
with half the step size; components that decay below ``floor`` are set to
exactly zero, making extinction absorbing.
"""

from __future__ import annotations

import numpy as np

from .errors import StiffnessError

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

H_MIN = 1e-14
FLOOR = 1e-12


def integrate(rhs, y0, t_end, record_times=None, rtol=1e-8, atol=1e-8, h0=None, floor=FLOOR,
              max_steps=10_000_000):
    """Integrate ``dy/dt = rhs(t, y)`` from ``t = 0`` to ``t_end``.

    Returns ``(times, states)`` where ``states[k]`` is the solution at
    ``times[k]``.  Steps are shortened to land exactly on each record time, so
    no interpolation is involved.  ``record_times`` defaults to ``[0, t_end]``.
    """
    # overflow in a trial stage only means the step is rejected
    with np.errstate(over="ignore", invalid="ignore"):
        return _integrate(rhs, y0, t_end, record_times, rtol, atol, h0, floor, max_steps)


def _integrate(rhs, y0, t_end, record_times, rtol, atol, h0, floor, max_steps):
    y = np.array(y0, dtype=float)
    if np.any(y < 0):
        raise ValueError("initial state must be nonnegative")
    y[y < floor] = 0.0
    if record_times is None:
        record_times = np.array([0.0, t_end])
    record_times = np.asarray(record_times, dtype=float)
    if np.any(np.diff(record_times) <= 0) or record_times[0] < 0 or record_times[-1] > t_end + 1e-12:
        raise ValueError("record times must increase strictly within [0, t_end]")

    out = np.empty((record_times.size,) + y.shape)
    k = 0
    t = 0.0
    while k < record_times.size and record_times[k] <= t:
        out[k] = y
        k += 1
    if k == record_times.size:
        return record_times, out

    f = np.asarray(rhs(t, y), dtype=float)
    if h0 is None:
        scale = atol + rtol * np.abs(y)
        d0 = np.sqrt(np.mean((y / scale) ** 2)) if y.size else 0.0
        d1 = np.sqrt(np.mean((f / scale) ** 2)) if y.size else 0.0
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h0 = min(h0, t_end)
    h = h0
    stages = [None] * 7
    steps = 0
    while k < record_times.size:
        target = record_times[k]
        h_try = min(h, target - t)
        clipped = h_try < h
        stages[0] = f
        left_orthant = False
        for s in range(1, 7):
            ys = y.copy()
            for j, a in enumerate(_A[s]):
                if a != 0.0:
                    ys += h_try * a * stages[j]
            if np.any(ys < 0):
                left_orthant = True
                break
            stages[s] = np.asarray(rhs(t + _C[s] * h_try, ys), dtype=float)
        steps += 1
        if steps > max_steps:
            raise StiffnessError(f"exceeded {max_steps} steps at t={t}")
        if left_orthant:
            err_norm = 0.0
        else:
            y_new = ys  # the last stage is evaluated at the 5th-order solution (FSAL)
            err = h_try * sum(e * st for e, st in zip(_E, stages) if e != 0.0)
            sc = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err_norm = float(np.max(np.abs(err) / sc)) if y.size else 0.0
            if not np.isfinite(err_norm):
                err_norm = np.inf

        if err_norm <= 1.0 and not left_orthant:
            t = target if clipped or h_try == target - t else t + h_try
            y = y_new
            extinct = (y < floor) & (y != 0.0)
            if np.any(extinct):
                y[extinct] = 0.0
                f = np.asarray(rhs(t, y), dtype=float)
            else:
                f = stages[6]
            if t >= target:
                out[k] = y
                k += 1
            fac = 5.0 if err_norm == 0 else min(5.0, 0.9 * err_norm ** -0.2)
            if not clipped:
                h = h_try * fac
        else:
            if err_norm > 1.0:
                h = h_try * max(0.2, 0.9 * err_norm ** -0.25)
            else:
                h = 0.5 * h_try
            if h < H_MIN:
                raise StiffnessError(f"step size {h:.3g} below {H_MIN:g} at t={t}")
    return record_times, out
