"""Peaked functions on clustered grids, their norms, and initial-datum families.

A :class:`PeakedFunction` is a sampled function that is continuous everywhere,
smooth on either side of a single peak point, and may have a jump in its first
derivative at the peak. The peak itself is never a grid node: the value there and
the two one-sided slopes are stored separately.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MIN_HALF_WIDTH = 20.0
CONTINUITY_TOL = 1e-6
DECAY_TOL = 1e-4

DEFAULT_L = 25.0
DEFAULT_N = 2000
DEFAULT_RATIO = 1.003


class GridError(ValueError):
    """Raised for non-monotone, non-finite or otherwise unusable grids."""


class ContinuityError(ValueError):
    """Raised when samples do not extrapolate to the stored peak value."""


class DecayError(ValueError):
    """Raised when a function does not decay towards the grid boundary."""


def make_grid(L: float = DEFAULT_L, N: int = DEFAULT_N, ratio: float = DEFAULT_RATIO) -> np.ndarray:
    """Symmetric grid of ``2 * N`` nodes on ``[-L, L]`` excluding the origin.

    Spacings grow geometrically by ``ratio`` away from 0, so the finest cells sit
    next to the peak and the outermost node on each side is exactly ``±L``.
    """
    if not (math.isfinite(L) and L >= MIN_HALF_WIDTH):
        raise GridError(f"half-width L={L} must be >= {MIN_HALF_WIDTH} to keep e^-L truncation negligible")
    if int(N) != N or N < 2:
        raise GridError(f"node count per side N={N} must be an integer >= 2")
    if not (math.isfinite(ratio) and ratio >= 1.0):
        raise GridError(f"clustering ratio={ratio} must be >= 1")
    N = int(N)
    k = np.arange(N, dtype=float)
    if ratio == 1.0:
        h = np.full(N, L / N)
    else:
        h0 = L * (ratio - 1.0) / math.expm1(N * math.log(ratio))
        h = h0 * ratio**k
    right = np.cumsum(h)
    right *= L / right[-1]
    return np.concatenate([-right[::-1], right])


def refine_grid_params(N: int, ratio: float) -> tuple[int, float]:
    """Node count and ratio whose grid has every spacing (approximately) halved."""
    return 2 * N, math.sqrt(ratio)


def _as_float_array(a, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class PeakedFunction:
    """Sampled ``v`` with values and slopes at nodes plus one-sided peak data.

    ``coords`` must be strictly increasing, must not contain ``center`` and must
    have nodes on both sides of it. With ``check=True`` the samples are also
    required to be continuous at the peak and to decay towards the boundary.
    """

    coords: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    peak_value: float
    slope_right: float
    slope_left: float
    center: float = 0.0
    check: bool = field(default=True, repr=False)
    continuity_tol: float = field(default=CONTINUITY_TOL, repr=False)
    decay_tol: float = field(default=DECAY_TOL, repr=False)

    def __post_init__(self):
        for name in ("coords", "values", "slopes"):
            object.__setattr__(self, name, _as_float_array(getattr(self, name), name))
        for name in ("peak_value", "slope_right", "slope_left", "center"):
            object.__setattr__(self, name, float(getattr(self, name)))
        x = self.coords
        if not (x.shape == self.values.shape == self.slopes.shape):
            raise GridError("coords, values and slopes must have equal length")
        if not np.all(np.isfinite(x)) or np.any(np.diff(x) <= 0):
            raise GridError("coords must be finite and strictly increasing")
        n_left = int(np.searchsorted(x, self.center))
        if n_left < 2 or n_left > x.size - 2:
            raise GridError("need at least two nodes on each side of the peak")
        if x[n_left] == self.center:
            raise GridError("the peak point must not be a grid node")
        object.__setattr__(self, "_n_left", n_left)
        if not (np.all(np.isfinite(self.values)) and np.all(np.isfinite(self.slopes))):
            raise ValueError("values and slopes must be finite")
        if not all(math.isfinite(getattr(self, n)) for n in ("peak_value", "slope_right", "slope_left")):
            raise ValueError("peak data must be finite")
        if self.check:
            self._check_continuity()
            self._check_decay()

    # -- invariants -------------------------------------------------------
    def _check_continuity(self):
        c, x, v, vx = self.center, self.coords, self.values, self.slopes
        i = self._n_left
        for i1, i2 in ((i - 1, i - 2), (i, i + 1)):
            d1, d2 = x[i1] - c, x[i2] - c
            extrap = v[i1] - d1 * (v[i2] - v[i1]) / (d2 - d1)
            # bound on linear-extrapolation error from the local curvature estimate
            curv = abs(vx[i2] - vx[i1]) / abs(d2 - d1)
            tol = self.continuity_tol + curv * abs(d1 * d2)
            if abs(extrap - self.peak_value) > tol:
                side = "left" if i1 < i else "right"
                raise ContinuityError(
                    f"{side} samples extrapolate to {extrap:.6g} at the peak, stored value {self.peak_value:.6g}"
                )

    def _check_decay(self):
        x = self.coords - self.center
        half = 0.5 * min(-x[0], x[-1])
        tail = np.abs(x) > half
        if not np.any(tail):
            return
        vmax = float(np.max(np.abs(self.values[tail])))
        dens = self.values**2 + self.slopes**2
        mass = 0.0
        for sel in (x < -half, x > half):
            if np.count_nonzero(sel) > 1:
                mass += float(np.trapezoid(dens[sel], x[sel]))
        if vmax > self.decay_tol or mass > self.decay_tol:
            raise DecayError(f"tail beyond |x|={half:.3g}: max|v|={vmax:.3g}, H1 mass={mass:.3g}")

    # -- views ------------------------------------------------------------
    @property
    def n_left(self) -> int:
        return self._n_left

    @property
    def half_width(self) -> float:
        return float(min(self.center - self.coords[0], self.coords[-1] - self.center))

    def halfline(self, side: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Nodes, values and slopes of one half-line with the peak as end node."""
        i = self._n_left
        c = np.array([self.center])
        if side == "plus":
            return (
                np.concatenate([c, self.coords[i:]]),
                np.concatenate([[self.peak_value], self.values[i:]]),
                np.concatenate([[self.slope_right], self.slopes[i:]]),
            )
        if side == "minus":
            return (
                np.concatenate([self.coords[:i], c]),
                np.concatenate([self.values[:i], [self.peak_value]]),
                np.concatenate([self.slopes[:i], [self.slope_left]]),
            )
        raise ValueError(f"side must be 'plus' or 'minus', got {side!r}")

    def augmented(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All nodes with the peak inserted twice (left limit, then right limit)."""
        xm, vm, sm = self.halfline("minus")
        xp, vp, sp = self.halfline("plus")
        return np.concatenate([xm, xp]), np.concatenate([vm, vp]), np.concatenate([sm, sp])

    def scaled(self, lam: float) -> PeakedFunction:
        return PeakedFunction(
            self.coords,
            lam * self.values,
            lam * self.slopes,
            lam * self.peak_value,
            lam * self.slope_right,
            lam * self.slope_left,
            center=self.center,
            check=False,
        )


def zero_function(coords: np.ndarray) -> PeakedFunction:
    z = np.zeros_like(coords, dtype=float)
    return PeakedFunction(coords, z, z, 0.0, 0.0, 0.0)


def peakon_function(coords: np.ndarray, amplitude: float = 1.0, center: float = 0.0) -> PeakedFunction:
    """``amplitude * exp(-|x - center|)`` sampled with exact one-sided slopes."""
    x = np.asarray(coords, dtype=float)
    e = amplitude * np.exp(-np.abs(x - center))
    return PeakedFunction(x, e, -np.sign(x - center) * e, amplitude, -amplitude, amplitude, center=center)


# -- norms and functionals --------------------------------------------------


def _halfline_integral(v: PeakedFunction, side: str, density) -> float:
    x, f, fx = v.halfline(side)
    return float(np.trapezoid(density(f, fx), x))


def h1_norm_halfline(v: PeakedFunction, side: str) -> float:
    return math.sqrt(_halfline_integral(v, side, lambda f, fx: f * f + fx * fx))


def energy_E(u: PeakedFunction) -> float:
    """``∫ (u² + u_x²) dx``, the sum of the two half-line H¹ integrals."""
    dens = lambda f, fx: f * f + fx * fx  # noqa: E731
    return _halfline_integral(u, "minus", dens) + _halfline_integral(u, "plus", dens)


def energy_F(u: PeakedFunction) -> float:
    """``∫ (u⁴ + 2 u² u_x² - u_x⁴ / 3) dx``."""

    def dens(f, fx):
        f2, g2 = f * f, fx * fx
        return f2 * f2 + 2.0 * f2 * g2 - g2 * g2 / 3.0

    return _halfline_integral(u, "minus", dens) + _halfline_integral(u, "plus", dens)


def h1_norm(v: PeakedFunction) -> float:
    return math.sqrt(energy_E(v))


def slope_power_integral(v: PeakedFunction, p: float) -> float:
    """``∫ |v_x|^p dx`` over the whole line."""
    dens = lambda f, fx: np.abs(fx) ** p  # noqa: E731
    return _halfline_integral(v, "minus", dens) + _halfline_integral(v, "plus", dens)


def linf_slope(v: PeakedFunction, side: str) -> float:
    _, _, fx = v.halfline(side)
    return float(np.max(np.abs(fx)))


def linf_value(v: PeakedFunction) -> float:
    return float(max(np.max(np.abs(v.values)), abs(v.peak_value)))


def w1inf_norm(v: PeakedFunction) -> float:
    return max(linf_value(v), linf_slope(v, "plus"), linf_slope(v, "minus"))


def interpolate(v: PeakedFunction, x):
    """Piecewise-linear interpolation of values with the peak as a breakpoint.

    Points outside the grid evaluate to 0 (the functions decay there).
    """
    xs = np.concatenate([v.coords[: v.n_left], [v.center], v.coords[v.n_left :]])
    fs = np.concatenate([v.values[: v.n_left], [v.peak_value], v.values[v.n_left :]])
    out = np.interp(x, xs, fs, left=0.0, right=0.0)
    return float(out) if np.ndim(out) == 0 else out


def interpolate_slope(v: PeakedFunction, x):
    """Piecewise-linear interpolation of slopes, separately on each side of the peak.

    Exactly at the peak the mean of the one-sided limits is returned.
    """
    xq = np.asarray(x, dtype=float)
    out = np.zeros_like(xq)
    xm, _, sm = v.halfline("minus")
    xp, _, sp = v.halfline("plus")
    lo, hi = xq < v.center, xq > v.center
    out[lo] = np.interp(xq[lo], xm, sm, left=0.0)
    out[hi] = np.interp(xq[hi], xp, sp, right=0.0)
    out[xq == v.center] = 0.5 * (v.slope_left + v.slope_right)
    return float(out) if out.ndim == 0 else out


# -- initial data -------------------------------------------------------------

FAMILIES = ("zero", "scaled_peakon", "peaked_exponential", "gaussian")


@dataclass(frozen=True)
class InitialDatumSpec:
    """Analytic family of peaked perturbations.

    ``peaked_exponential`` is ``(A + (slope_right + beta*A) x) e^{-beta x}`` for
    ``x > 0`` and ``(A + (slope_left - beta*A) x) e^{beta x}`` for ``x < 0``, so
    that ``v(0) = A`` and the one-sided slopes at 0 are exactly as given.
    """

    family: str = "zero"
    amplitude: float = 0.0
    beta: float = 1.0
    slope_right: float = 0.0
    slope_left: float = 0.0
    sigma: float = 1.0
    center: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown datum family {self.family!r}; expected one of {FAMILIES}")
        if self.beta <= 0 or self.sigma <= 0:
            raise ValueError("beta and sigma must be positive")

    def evaluate(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Values and slopes at ``x`` (one-sided slopes from the right at 0)."""
        x = np.asarray(x, dtype=float)
        A, b = self.amplitude, self.beta
        if self.family == "zero":
            return np.zeros_like(x), np.zeros_like(x)
        if self.family == "scaled_peakon":
            e = A * np.exp(-np.abs(x))
            return e, np.where(x < 0, e, -e)
        if self.family == "peaked_exponential":
            ax = np.abs(x)
            e = np.exp(-b * ax)
            cr, cl = self.slope_right + b * A, self.slope_left - b * A
            val = np.where(x < 0, (A + cl * x) * e, (A + cr * x) * e)
            der = np.where(x < 0, (self.slope_left + b * cl * x) * e, (self.slope_right - b * cr * x) * e)
            return val, der
        g = A * np.exp(-((x - self.center) ** 2) / (2 * self.sigma**2))
        return g, -(x - self.center) / self.sigma**2 * g

    def peak_data(self) -> tuple[float, float, float]:
        """``(v(0), v_x(0+), v_x(0-))``."""
        A = self.amplitude
        if self.family == "zero":
            return 0.0, 0.0, 0.0
        if self.family == "scaled_peakon":
            return A, -A, A
        if self.family == "peaked_exponential":
            return A, self.slope_right, self.slope_left
        g0 = A * math.exp(-(self.center**2) / (2 * self.sigma**2))
        d0 = self.center / self.sigma**2 * g0
        return g0, d0, d0

    def sample(self, coords: np.ndarray, **kwargs) -> PeakedFunction:
        vals, ders = self.evaluate(coords)
        p, sr, sl = self.peak_data()
        return PeakedFunction(coords, vals, ders, p, sr, sl, **kwargs)

    def scaled(self, lam: float) -> InitialDatumSpec:
        """The same family with every amplitude-like parameter multiplied by ``lam``."""
        return InitialDatumSpec(
            self.family,
            lam * self.amplitude,
            self.beta,
            lam * self.slope_right,
            lam * self.slope_left,
            self.sigma,
            self.center,
        )


def datum_with_h1_norm(spec: InitialDatumSpec, coords: np.ndarray, target: float) -> InitialDatumSpec:
    """Rescale ``spec`` so that its sampled H¹ norm equals ``target``."""
    norm = h1_norm(spec.sample(coords))
    if norm == 0.0:
        raise ValueError("cannot rescale the zero datum to a nonzero norm")
    return spec.scaled(target / norm)


def random_datum_spec(rng: np.random.Generator) -> InitialDatumSpec:
    """A random moderate-size peaked datum for identity and property tests."""
    return InitialDatumSpec(
        "peaked_exponential",
        amplitude=float(rng.uniform(-0.5, 0.5)),
        beta=float(rng.uniform(1.0, 2.5)),
        slope_right=float(rng.uniform(-1.0, 1.0)),
        slope_left=float(rng.uniform(-1.0, 1.0)),
    )


# -- snapshot files -------------------------------------------------------------


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def write_snapshot(path, t: float, v: PeakedFunction) -> None:
    """Write ``# t=<t>`` then ``x,v,vx,side`` rows; the peak appears twice (L and R)."""
    i = v.n_left
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# t={format_float(t)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "v", "vx", "side"])
        for x, f, fx in zip(v.coords[:i], v.values[:i], v.slopes[:i]):
            w.writerow([format_float(x), format_float(f), format_float(fx), "·"])
        w.writerow([format_float(v.center), format_float(v.peak_value), format_float(v.slope_left), "L"])
        w.writerow([format_float(v.center), format_float(v.peak_value), format_float(v.slope_right), "R"])
        for x, f, fx in zip(v.coords[i:], v.values[i:], v.slopes[i:]):
            w.writerow([format_float(x), format_float(f), format_float(fx), "·"])


def read_snapshot(path) -> tuple[float, PeakedFunction]:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or not text[0].startswith("# t="):
        raise ValueError(f"{path}: missing '# t=' header")
    t = float(text[0][4:])
    rows = list(csv.DictReader(text[1:]))
    xs, vs, ds = [], [], []
    peak = {}
    for r in rows:
        if r["side"] in ("L", "R"):
            peak[r["side"]] = (float(r["x"]), float(r["v"]), float(r["vx"]))
        else:
            xs.append(float(r["x"]))
            vs.append(float(r["v"]))
            ds.append(float(r["vx"]))
    c, p, sl = peak["L"]
    _, _, sr = peak["R"]
    return t, PeakedFunction(np.array(xs), np.array(vs), np.array(ds), p, sr, sl, center=c, check=False)
