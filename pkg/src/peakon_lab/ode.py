"""Classical fixed-step Runge-Kutta integration."""

from __future__ import annotations

import numpy as np


def rk4_step(f, y: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_integrate(f, y0: np.ndarray, t_end: float, dt: float) -> np.ndarray:
    """Integrate ``y' = f(y)`` from 0 to ``t_end`` with ``round(t_end/dt)`` equal steps."""
    n = max(1, int(round(abs(t_end) / dt)))
    h = t_end / n
    y = np.array(y0, dtype=float)
    for _ in range(n):
        y = rk4_step(f, y, h)
    return y
