"""Adaptive Dormand-Prince 5(4) integrator for complex-valued ODEs.

Written for small dense systems (a few dozen unknowns) where the per-step
Python overhead of a general solver dominates. Steps are clipped so that
every requested output time is hit exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NonConvergence(RuntimeError):
    """The adaptive step size underflowed before reaching the end time."""


# Dormand & Prince (1980) tableau
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

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


@dataclass
class SolverStats:
    accepted: int = 0
    rejected: int = 0
    nfev: int = 0

    def merge(self, other: "SolverStats") -> "SolverStats":
        return SolverStats(self.accepted + other.accepted, self.rejected + other.rejected,
                           self.nfev + other.nfev)


def _error_norm(err, y0, y1, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.max(np.abs(err) / scale))


def solve(f, t_span, y0, t_eval=None, rtol=1e-10, atol=None, h0=None, max_steps=1_000_000,
          on_step=None):
    """Integrate dy/dt = f(t, y) from t_span[0] to t_span[1].

    The span may run backwards in time. Returns ``(times, states, stats)``
    where ``times`` are the accepted step end points (or exactly ``t_eval``
    when given, which must lie inside the span and be monotone in the
    integration direction). ``on_step(t, y)`` is called after every
    accepted step.

    Raises NonConvergence if the step size falls below the floating point
    resolution of t.
    """
    t0, t1 = map(float, t_span)
    y = np.array(y0, dtype=complex)
    if atol is None:
        atol = 1e-2 * rtol
    direction = 1.0 if t1 >= t0 else -1.0
    stats = SolverStats()

    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        if t_eval.size and (direction * np.min(direction * t_eval) < direction * t0 - 1e-12
                            or direction * np.max(direction * t_eval) > direction * t1 + 1e-12):
            raise ValueError("t_eval must lie within t_span")
        if np.any(np.diff(t_eval) * direction < 0):
            raise ValueError("t_eval must be monotone in the integration direction")
    out_t = []
    out_y = []
    ev = 0
    if t_eval is None:
        out_t.append(t0)
        out_y.append(y.copy())
    else:
        while ev < len(t_eval) and t_eval[ev] == t0:
            out_t.append(t0)
            out_y.append(y.copy())
            ev += 1

    if t0 == t1:
        return np.array(out_t), np.array(out_y), stats

    k = np.empty((7, y.size), dtype=complex)
    k[0] = f(t0, y)
    stats.nfev += 1
    if h0 is None:
        # crude initial guess, corrected quickly by the controller
        d0 = np.max(np.abs(y)) + atol
        d1 = np.max(np.abs(k[0])) + atol
        h = 0.01 * d0 / d1
        h = min(h, abs(t1 - t0))
    else:
        h = abs(h0)

    t = t0
    for _ in range(max_steps):
        if direction * (t1 - t) <= 0:
            break
        # next target: end of span or next output time
        target = t1
        if t_eval is not None and ev < len(t_eval):
            target = t_eval[ev]
        hit = False
        step = h
        if abs(target - t) <= step * (1 + 1e-12):
            step = abs(target - t)
            hit = True
        if step < 16 * np.spacing(abs(t)) and not hit:
            raise NonConvergence(f"step size underflow at t={t:.6g} (h={step:.3g})")

        while True:
            hs = direction * step
            for i in range(1, 7):
                dy = hs * (np.asarray(_A[i]) @ k[:i])
                k[i] = f(t + _C[i] * hs, y + dy)
            stats.nfev += 6
            y_new = y + hs * (_B5 @ k)
            err = hs * (_E @ k)
            en = _error_norm(err, y, y_new, rtol, atol)
            if en <= 1.0:
                break
            stats.rejected += 1
            step *= max(MIN_FACTOR, SAFETY * en ** -0.2)
            hit = False
            if step < 16 * np.spacing(abs(t)):
                raise NonConvergence(f"step size underflow at t={t:.6g} (h={step:.3g})")

        t_new = target if hit else t + hs
        stats.accepted += 1
        factor = MAX_FACTOR if en == 0 else min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * en ** -0.2))
        # a step shortened to hit an output time says nothing about the natural size
        h = max(h, step * factor) if hit else step * factor
        t, y = t_new, y_new
        k[0] = k[6]  # FSAL
        if on_step is not None:
            on_step(t, y)
        if t_eval is None:
            out_t.append(t)
            out_y.append(y.copy())
        elif hit and ev < len(t_eval):
            while ev < len(t_eval) and t_eval[ev] == target:
                out_t.append(t)
                out_y.append(y.copy())
                ev += 1
    else:
        raise NonConvergence(f"exceeded {max_steps} steps")

    return np.array(out_t), np.array(out_y), stats
