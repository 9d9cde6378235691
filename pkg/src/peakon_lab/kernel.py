"""Peakon profile and linear-time convolutions with ``e^{-|x|}`` and its derivative.

With ``phi(x) = e^{-|x|}`` the convolution splits as

    (phi * f)(x) = e^{-x} ∫_{-∞}^{x} e^{y} f(y) dy + e^{x} ∫_{x}^{∞} e^{-y} f(y) dy

so both halves are cumulative sums over trapezoid panels. The sums are evaluated
in chunks, each shifted by its own right end, so no exponential ever overflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gridfn import GridError, PeakedFunction

# widest coordinate span evaluated against one shift; e^300 is far from overflow
_CHUNK_SPAN = 300.0
BOUNDARY_TOL = 1e-8


class BoundaryDecayError(ValueError):
    """Raised when a convolution input does not decay at the grid ends."""


@dataclass(frozen=True)
class PeakonParams:
    c: float = 1.0
    x0: float = 0.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"peakon speed must be positive, got c={self.c}")


@dataclass(frozen=True, eq=False)
class SampledField:
    coords: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        x = np.array(self.coords, dtype=float).reshape(-1)
        f = np.array(self.values, dtype=float).reshape(-1)
        if x.shape != f.shape:
            raise GridError("coords and values must have equal length")
        if x.size < 2 or not np.all(np.isfinite(x)) or np.any(np.diff(x) <= 0):
            raise GridError("coords must be finite and strictly increasing")
        if not np.all(np.isfinite(f)):
            raise ValueError("values must be finite")
        x.flags.writeable = False
        f.flags.writeable = False
        object.__setattr__(self, "coords", x)
        object.__setattr__(self, "values", f)


def peakon_profile(p: PeakonParams, x):
    return math.sqrt(p.c) * np.exp(-np.abs(np.asarray(x, dtype=float) - p.x0))


def phi(x):
    return np.exp(-np.abs(x))


def phi_x(x):
    """``-sgn(x) e^{-|x|}``; zero at the origin, where it is two-valued."""
    return -np.sign(x) * np.exp(-np.abs(x))


# -- scans ----------------------------------------------------------------------


def _decayed_prefix(x: np.ndarray, gl: np.ndarray, gr: np.ndarray) -> np.ndarray:
    """``out[k] = Σ_{j<k} gl[j] e^{-(x_k - x_j)} + gr[j] e^{-(x_k - x_{j+1})}``.

    Panel ``j`` spans nodes ``j, j+1``; ``gl``/``gr`` are its weighted endpoint
    integrands. ``x`` must be non-decreasing (repeated nodes give empty panels).
    """
    n = x.size
    out = np.zeros(n)
    start, carry = 0, 0.0
    while start < n - 1:
        end = int(np.searchsorted(x, x[start] + _CHUNK_SPAN, side="right")) - 1
        end = min(max(end, start + 1), n - 1)
        xr = x[end]
        c = gl[start:end] * np.exp(x[start:end] - xr) + gr[start:end] * np.exp(x[start + 1 : end + 1] - xr)
        cum = np.concatenate([[0.0], np.cumsum(c)])
        seg = x[start : end + 1]
        out[start : end + 1] = carry * np.exp(x[start] - seg) + cum * np.exp(xr - seg)
        carry = out[end]
        start = end
    return out


def exp_split(x: np.ndarray, gl: np.ndarray, gr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper halves of an ``e^{-|x-y|}`` panel quadrature at every node.

    Returns ``(lo, hi)`` with ``lo`` collecting panels left of each node and ``hi``
    those to the right, so that ``phi * g = lo + hi`` and ``phi_x * g = hi - lo``.
    """
    lo = _decayed_prefix(x, gl, gr)
    hi = _decayed_prefix(-x[::-1], gr[::-1], gl[::-1])[::-1]
    return lo, hi


def _trapezoid_panels(x: np.ndarray, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    half = 0.5 * np.diff(x)
    return half * f[:-1], half * f[1:]


def _check_field(f: SampledField, tol: float):
    if abs(f.values[0]) > tol or abs(f.values[-1]) > tol:
        raise BoundaryDecayError(
            f"input does not decay at the grid ends: |f| = {abs(f.values[0]):.3g}, {abs(f.values[-1]):.3g}"
        )


def conv_phi(f: SampledField, tol: float = BOUNDARY_TOL) -> SampledField:
    """``(phi * f)`` at every node, trapezoid rule, linear cost."""
    _check_field(f, tol)
    lo, hi = exp_split(f.coords, *_trapezoid_panels(f.coords, f.values))
    return SampledField(f.coords, lo + hi)


def conv_phix(f: SampledField, tol: float = BOUNDARY_TOL) -> SampledField:
    """``(phi_x * f)`` at every node, trapezoid rule, linear cost."""
    _check_field(f, tol)
    lo, hi = exp_split(f.coords, *_trapezoid_panels(f.coords, f.values))
    return SampledField(f.coords, hi - lo)


def conv_direct(x: np.ndarray, f: np.ndarray, kernel) -> np.ndarray:
    """O(N²) trapezoid convolution ``Σ_j w_j K(x_i - x_j) f_j``; reference only.

    The kernel is evaluated one-sidedly at coincident nodes so that odd kernels
    match the panel-wise treatment of :func:`exp_split`.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty(x.size)
    gl, gr = _trapezoid_panels(x, np.asarray(f, dtype=float))
    for i, xi in enumerate(x):
        left = np.arange(x.size - 1) < i
        dl, dr = xi - x[:-1], xi - x[1:]
        # panels left of node i see a positive offset, panels to the right a negative one
        kl = np.where(left, kernel(dl, +1), kernel(dl, -1))
        kr = np.where(left, kernel(dr, +1), kernel(dr, -1))
        out[i] = np.sum(gl * kl + gr * kr)
    return out


def kernel_phi(d, side):
    return np.exp(-np.abs(d))


def kernel_phix(d, side):
    s = np.where(d == 0, side, np.sign(d))
    return -s * np.exp(-np.abs(d))


# -- nonlocal functionals of a peaked function ---------------------------------


def _cubic_integrands(v: np.ndarray, vx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return 1.5 * v * vx * vx + v**3, vx**3


def _peaked_convolutions(v: PeakedFunction):
    """phi- and phi_x-convolutions of the two cubic integrands on the augmented grid."""
    x, f, fx = v.augmented()
    A, B = _cubic_integrands(f, fx)
    loA, hiA = exp_split(x, *_trapezoid_panels(x, A))
    loB, hiB = exp_split(x, *_trapezoid_panels(x, B))
    return x, (loA + hiA, hiA - loA), (loB + hiB, hiB - loB)


def _drop_peak(v: PeakedFunction, arr: np.ndarray) -> np.ndarray:
    i = v.n_left
    return np.concatenate([arr[:i], arr[i + 2 :]])


def q_functional(v: PeakedFunction) -> SampledField:
    """``Q[v] = ½ phi_x * (3/2 v v_x² + v³) + ¼ phi * v_x³`` on ``v``'s grid."""
    _, (_, phixA), (phiB, _) = _peaked_convolutions(v)
    return SampledField(v.coords, _drop_peak(v, 0.5 * phixA + 0.25 * phiB))


def p_functional(v: PeakedFunction) -> SampledField:
    """``P[v] = ½ phi * (3/2 v v_x² + v³) + ¼ phi_x * v_x³`` on ``v``'s grid."""
    _, (phiA, _), (_, phixB) = _peaked_convolutions(v)
    return SampledField(v.coords, _drop_peak(v, 0.5 * phiA + 0.25 * phixB))


def pq_at_peak(v: PeakedFunction) -> tuple[float, float]:
    """``(P[v], Q[v])`` evaluated at the peak point."""
    _, (phiA, phixA), (phiB, phixB) = _peaked_convolutions(v)
    i = v.n_left  # either copy of the peak gives the same value
    return float(0.5 * phiA[i] + 0.25 * phixB[i]), float(0.5 * phixA[i] + 0.25 * phiB[i])


# -- identity residuals -----------------------------------------------------------


def _conv_pair(x, g):
    lo, hi = exp_split(x, *_trapezoid_panels(x, g))
    return lo + hi, hi - lo


def _phi_pair(x: np.ndarray, n_left: int):
    """phi and one-sided phi_x on an augmented grid (peak copies at n_left, n_left+1)."""
    p = np.exp(-np.abs(x))
    px = -np.sign(x) * p
    px[n_left] = 1.0
    px[n_left + 1] = -1.0
    return p, px


def _cumulative_from_peak(x: np.ndarray, g: np.ndarray, n_left: int) -> np.ndarray:
    """Signed ``∫_0^x g`` on an augmented grid, trapezoid outward from the peak."""
    out = np.zeros_like(g)
    i = n_left
    right = slice(i + 1, None)
    out[right] = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(x[right]) * (g[right][1:] + g[right][:-1]))])
    xl, gl_ = x[: i + 1][::-1], g[: i + 1][::-1]
    out[: i + 1] = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(xl) * (gl_[1:] + gl_[:-1]))])[::-1]
    return out


def identity_residual_linear(v: PeakedFunction) -> float:
    """Sup-norm defect of the linear nonlocal-term simplification."""
    x, f, fx = v.augmented()
    i = v.n_left
    p, px = _phi_pair(x, i)
    _, a = _conv_pair(x, p * p * f + 0.5 * px * px * f + p * px * fx)
    b, _ = _conv_pair(x, px * px * fx)
    lhs = 1.5 * a + 0.75 * b
    rhs = 3.0 * px * (v.peak_value - p * f)
    return float(np.max(np.abs(_drop_peak(v, lhs - rhs))))


def identity_residual_calc(f: SampledField) -> float:
    """Sup-norm of ``phi_x*(phi f) + phi*(phi_x f) + 2 phi ∫_0^x f``.

    ``f`` is sampled on a grid straddling 0; its value at 0 is interpolated and
    inserted on both sides so the kink of ``phi`` at 0 falls on a panel boundary.
    """
    x0 = f.coords
    i = int(np.searchsorted(x0, 0.0))
    if i == 0 or i == x0.size or x0[i] == 0.0:
        raise GridError("grid must straddle 0 without containing it")
    f0 = float(np.interp(0.0, x0, f.values))
    x = np.concatenate([x0[:i], [0.0, 0.0], x0[i:]])
    g = np.concatenate([f.values[:i], [f0, f0], f.values[i:]])
    p, px = _phi_pair(x, i)
    _, a = _conv_pair(x, p * g)
    b, _ = _conv_pair(x, px * g)
    res = a + b + 2.0 * p * _cumulative_from_peak(x, g, i)
    return float(np.max(np.abs(np.concatenate([res[:i], res[i + 2 :]]))))


def identity_residual_quadratic(v: PeakedFunction) -> float:
    """Sup-norm defect of the quadratic nonlocal-term simplification."""
    x, f, fx = v.augmented()
    i = v.n_left
    p, px = _phi_pair(x, i)
    _, a = _conv_pair(x, 1.5 * p * fx * fx + 3.0 * px * f * fx + 3.0 * p * f * f)
    b, _ = _conv_pair(x, px * fx * fx)
    lhs = 0.5 * a + 0.75 * b
    integral = _cumulative_from_peak(x, f * f + fx * fx, i)
    rhs = -1.5 * px * (f * f - v.peak_value**2) - 1.5 * p * integral
    return float(np.max(np.abs(_drop_peak(v, lhs - rhs))))
