"""Fully normalized associated Legendre functions by three-term recurrence.

``normalized_legendre(J_max, M, x)`` returns Pbar_J^M(x) for J = |M|..J_max
with  int_{-1}^{1} Pbar_J^M(x)^2 dx = 1, i.e. the theta part of Y_JM times
sqrt(2 pi). No Condon-Shortley phase: the overall sign at fixed M cancels
in every quantity computed here.
"""

import math

import numpy as np


def normalized_legendre(J_max: int, M: int, x) -> np.ndarray:
    """Array of shape (J_max - |M| + 1, len(x))."""
    m = abs(M)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if J_max < m:
        raise ValueError(f"J_max={J_max} < |M|={m}")
    out = np.empty((J_max - m + 1, x.size))
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    # Pbar_m^m = sqrt((2m+1)!! / (2 (2m)!!)) s^m, built up factor by factor
    p = np.full(x.size, math.sqrt(0.5))
    for k in range(1, m + 1):
        p = p * math.sqrt((2 * k + 1) / (2 * k)) * s
    out[0] = p
    if J_max == m:
        return out
    out[1] = math.sqrt(2 * m + 3) * x * p
    for i, l in enumerate(range(m + 2, J_max + 1), start=2):
        a = math.sqrt((4 * l * l - 1) / (l * l - m * m))
        b = math.sqrt(((l - 1) ** 2 - m * m) / (4 * (l - 1) ** 2 - 1))
        out[i] = a * (x * out[i - 1] - b * out[i - 2])
    return out
