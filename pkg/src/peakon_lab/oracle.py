"""Direct method-of-lines solver for ``u_t + u² u_x + ∂_x P1 + P2 = 0``.

``P1 = ½ phi * (3/2 u u_x² + u³)`` and ``P2 = ¼ phi * u_x³`` on a uniform grid.
The transport term is upwinded (the speed ``u²`` is never negative) with a
left-biased stencil of order 1, 3 or 5; the nonlocal integrands use per-cell
slopes and midpoint values, so a peak sitting on a node is integrated without
smearing. Meant only for short-time cross-checks.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .gridfn import PeakedFunction, format_float, interpolate
from .kernel import BOUNDARY_TOL, BoundaryDecayError, exp_split
from .ode import rk4_step


@dataclass(frozen=True, eq=False)
class DirectState:
    x_grid: np.ndarray
    u: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        x = np.array(self.x_grid, dtype=float)
        u = np.array(self.u, dtype=float)
        if x.ndim != 1 or x.shape != u.shape or x.size < 3:
            raise ValueError("x_grid and u must be 1-d arrays of equal length >= 3")
        dx = np.diff(x)
        if not np.allclose(dx, dx[0], rtol=1e-9, atol=0.0) or dx[0] <= 0:
            raise ValueError("x_grid must be uniform and increasing")
        if not np.all(np.isfinite(u)):
            raise ValueError("u must be finite")
        object.__setattr__(self, "x_grid", x)
        object.__setattr__(self, "u", u)

    @property
    def dx(self) -> float:
        return float(self.x_grid[1] - self.x_grid[0])


def uniform_grid(L: float, n_cells: int) -> np.ndarray:
    return np.linspace(-L, L, n_cells + 1)


# left-biased upwind stencils: offsets from i-3 to i+2
_UPWIND = {
    1: np.array([0.0, 0.0, -1.0, 1.0, 0.0, 0.0]),
    3: np.array([0.0, 1.0, -6.0, 3.0, 2.0, 0.0]) / 6.0,
    5: np.array([-2.0, 15.0, -60.0, 20.0, 30.0, -3.0]) / 60.0,
}


def upwind_slope(u: np.ndarray, dx: float, order: int = 5) -> np.ndarray:
    """``u_x`` biased towards the left neighbours; values beyond the ends are 0."""
    if order not in _UPWIND:
        raise ValueError(f"order must be one of {sorted(_UPWIND)}, got {order}")
    c = _UPWIND[order]
    up = np.pad(u, 3)
    n = u.size
    return sum(c[k] * up[k : k + n] for k in range(6) if c[k] != 0.0) / dx


def _rhs(x: np.ndarray, u: np.ndarray, dx: float, tol: float, order: int = 5) -> np.ndarray:
    if abs(u[0]) > tol or abs(u[-1]) > tol:
        raise BoundaryDecayError(f"direct state does not decay at the ends: {u[0]:.3g}, {u[-1]:.3g}")
    d = np.diff(u) / dx  # slope of each cell
    ubar = 0.5 * (u[1:] + u[:-1])
    half = 0.5 * dx
    A = half * (1.5 * ubar * d * d + ubar**3)
    B = half * d**3
    loA, hiA = exp_split(x, A, A)
    loB, hiB = exp_split(x, B, B)
    dP1 = 0.5 * (hiA - loA)
    P2 = 0.25 * (loB + hiB)
    return -u * u * upwind_slope(u, dx, order) - dP1 - P2


def direct_rhs(st: DirectState, tol: float = BOUNDARY_TOL, order: int = 5) -> np.ndarray:
    return _rhs(st.x_grid, st.u, st.dx, tol, order)


def direct_evolve(
    u0: DirectState, t_end: float, dt: float, nu: float = 0.0, tol: float = BOUNDARY_TOL, order: int = 5
) -> DirectState:
    """RK4 in time; ``nu > 0`` adds ``nu u_xx`` by second differences."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if nu < 0:
        raise ValueError(f"nu must be non-negative, got {nu}")
    x, dx = u0.x_grid, u0.dx

    def f(u):
        r = _rhs(x, u, dx, tol, order)
        if nu > 0:
            lap = np.zeros_like(u)
            lap[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (dx * dx)
            r = r + nu * lap
        return r

    steps = max(1, int(round((t_end - u0.t) / dt)))
    h = (t_end - u0.t) / steps
    u = np.array(u0.u)
    for _ in range(steps):
        u = rk4_step(f, u, h)
    return DirectState(x, u, t_end)


def direct_energy(st: DirectState) -> float:
    """``∫ (u² + u_x²) dx`` with cell slopes and trapezoid values."""
    d = np.diff(st.u) / st.dx
    return float(np.trapezoid(st.u**2, st.x_grid) + np.sum(d * d) * st.dx)


def compare(direct: DirectState, char_u: PeakedFunction, window_cells: int = 2) -> float:
    """Sup-difference on the direct grid, ignoring ``window_cells`` cells either side of the peak."""
    x = direct.x_grid
    keep = np.abs(x - char_u.center) > window_cells * direct.dx
    keep &= (x >= char_u.coords[0]) & (x <= char_u.coords[-1])
    diff = np.abs(direct.u[keep] - interpolate(char_u, x[keep]))
    return float(np.max(diff)) if diff.size else 0.0


def write_direct_snapshot(path, st: DirectState) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# t={format_float(st.t)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "v"])
        for x, u in zip(st.x_grid, st.u):
            w.writerow([format_float(x), format_float(u)])
