"""Nonlinear perturbation dynamics along characteristics in the co-moving frame.

The solution is written as ``u(t, x) = phi(x - a(t)) + v(t, x - a(t))`` with
the modulation speed ``a' = (1 + v(t, 0))²`` that keeps the peak at the origin.
Each Lagrangian label ``s`` carries its position ``q``, the perturbation value
``V`` and slope ``W`` there, and the Jacobian ``q_s``. The peak value and the
two one-sided slopes at the peak evolve as separate scalars because the slope
equation is singular at ``q = 0``.

The contributions of the peakon to the nonlocal terms are evaluated in closed
form; only the cubic part in the perturbation needs quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .gridfn import PeakedFunction
from .kernel import exp_split

SLOPE_BLOWUP_THRESHOLD = 1e6
JACOBIAN_THRESHOLD = 1e-8

OK = "ok"
BREAKDOWN_BLOWUP = "breakdown_blowup"
BREAKDOWN_JACOBIAN = "breakdown_jacobian"


class JacobianError(ValueError):
    """Raised when characteristics have (nearly) collided."""


@dataclass(frozen=True)
class Thresholds:
    slope_blowup: float = SLOPE_BLOWUP_THRESHOLD
    jacobian: float = JACOBIAN_THRESHOLD

    def __post_init__(self):
        if not (self.slope_blowup > 0 and self.jacobian > 0):
            raise ValueError("thresholds must be positive")


@dataclass(frozen=True, eq=False)
class CharacteristicEnsemble:
    s_nodes: np.ndarray
    q: np.ndarray
    V: np.ndarray
    W: np.ndarray
    qs: np.ndarray
    V0: float
    W0_plus: float
    W0_minus: float
    a: float = 0.0
    t: float = 0.0

    @property
    def n_left(self) -> int:
        return int(np.searchsorted(self.s_nodes, 0.0))

    @property
    def side(self) -> np.ndarray:
        return np.where(self.s_nodes > 0, 1.0, -1.0)

    def pack(self) -> np.ndarray:
        return np.concatenate([self.q, self.V, self.W, self.qs, [self.V0, self.W0_plus, self.W0_minus, self.a]])

    def unpack(self, y: np.ndarray, t: float) -> CharacteristicEnsemble:
        n = self.s_nodes.size
        return replace(
            self,
            q=y[:n],
            V=y[n : 2 * n],
            W=y[2 * n : 3 * n],
            qs=y[3 * n : 4 * n],
            V0=float(y[4 * n]),
            W0_plus=float(y[4 * n + 1]),
            W0_minus=float(y[4 * n + 2]),
            a=float(y[4 * n + 3]),
            t=float(t),
        )

    def perturbation(self) -> PeakedFunction:
        """``v`` in the co-moving frame, sampled at the current positions."""
        return PeakedFunction(self.q, self.V, self.W, self.V0, self.W0_plus, self.W0_minus, check=False)


@dataclass(frozen=True)
class StepOutcome:
    status: str = OK
    detail: str = ""
    time: float = math.nan

    @property
    def ok(self) -> bool:
        return self.status == OK


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    E: float
    F: float
    h1_v: float
    linf_vx_plus: float
    linf_vx_minus: float
    V0: float
    W0_plus: float
    W0_minus: float
    a: float
    qs_min: float
    pq0: float

    FIELDS = ("t", "E", "F", "h1_v", "linf_vx_plus", "linf_vx_minus", "V0", "W0_plus", "W0_minus", "a", "qs_min", "pq0")

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, k) for k in self.FIELDS)


def init_ensemble(v0: PeakedFunction) -> CharacteristicEnsemble:
    if v0.center != 0.0:
        raise ValueError("the perturbation must be centred on the peak at the origin")
    s = np.array(v0.coords)
    return CharacteristicEnsemble(
        s_nodes=s,
        q=s.copy(),
        V=np.array(v0.values),
        W=np.array(v0.slopes),
        qs=np.ones_like(s),
        V0=v0.peak_value,
        W0_plus=v0.slope_right,
        W0_minus=v0.slope_left,
    )


# -- nonlocal terms ---------------------------------------------------------------


def _panel_weights(s: np.ndarray, q: np.ndarray, qs: np.ndarray, i: int) -> tuple[np.ndarray, np.ndarray]:
    """Endpoint weights of each panel of the augmented node list (peak inserted twice).

    Interior panels use the trapezoid rule in ``s`` with the Jacobian folded in;
    the two panels touching the peak use the position increment directly, and the
    zero-width panel between the peak copies gets no weight.
    """
    ds = np.diff(s)
    wl = 0.5 * ds * qs[:-1]
    wr = 0.5 * ds * qs[1:]
    left_anchor = np.array([-0.5 * q[i - 1]])
    right_anchor = np.array([0.5 * q[i]])
    zero = np.zeros(1)
    gl = np.concatenate([wl[: i - 1], left_anchor, zero, right_anchor, wl[i:]])
    gr = np.concatenate([wr[: i - 1], left_anchor, zero, right_anchor, wr[i:]])
    return gl, gr


def _augment(arr: np.ndarray, i: int, left: float, right: float) -> np.ndarray:
    return np.concatenate([arr[:i], [left, right], arr[i:]])


def nonlocal_terms(e: CharacteristicEnsemble, jacobian_threshold: float = 0.0):
    """Quadratic integral ``I`` and cubic nonlocal terms ``Q[v]``, ``P[v]``.

    ``I(s) = ∫_0^{q(s)} (v² + v_x²) dy`` is accumulated outward from the peak
    (negative for ``s < 0``). Returns ``(I, Qv, Pv, Qv0, Pv0)`` with the last two
    evaluated at the peak.
    """
    qs_min = float(np.min(e.qs))
    if not qs_min > jacobian_threshold:
        raise JacobianError(f"min q_s = {qs_min:.3g} at t = {e.t:.6g}")
    i = e.n_left
    x = _augment(e.q, i, 0.0, 0.0)
    V = _augment(e.V, i, e.V0, e.V0)
    W = _augment(e.W, i, e.W0_minus, e.W0_plus)
    gl, gr = _panel_weights(e.s_nodes, e.q, e.qs, i)

    quad = V * V + W * W
    panel = gl * quad[:-1] + gr * quad[1:]
    I = np.zeros(x.size)
    I[i + 1 :] = np.cumsum(panel[i:])
    I[: i + 1] = _left_cumulative(panel[:i])

    A = 1.5 * V * W * W + V**3
    B = W**3
    loA, hiA = exp_split(x, gl * A[:-1], gr * A[1:])
    loB, hiB = exp_split(x, gl * B[:-1], gr * B[1:])
    Q = 0.5 * (hiA - loA) + 0.25 * (loB + hiB)
    P = 0.5 * (loA + hiA) + 0.25 * (hiB - loB)

    def drop(arr):
        return np.concatenate([arr[:i], arr[i + 2 :]])

    return drop(I), drop(Q), drop(P), float(Q[i]), float(P[i])


def _left_cumulative(panel_left: np.ndarray) -> np.ndarray:
    """Signed integral from the peak to each left node (including the peak copy)."""
    out = np.zeros(panel_left.size + 1)
    out[:-1] = -np.cumsum(panel_left[::-1])[::-1]
    return out


# -- vector field -----------------------------------------------------------------


def _rates(e: CharacteristicEnsemble, I, Qv, Pv, Qv0, Pv0):
    sg = e.side
    p = np.exp(-sg * e.q)
    px = -sg * p
    V, W, V0 = e.V, e.W, e.V0
    lam = 1.0 + V0
    dq = (p + 1.0 + V + V0) * (np.expm1(-sg * e.q) + V - V0)
    dV = px * (p * V - V0 + 0.5 * (V * V - V0 * V0)) + 1.5 * p * I - Qv
    dW = (
        p * (2.0 * p * V - V0)
        - p * px * W
        + p * (2.0 * V * V - 0.5 * V0 * V0 - 0.5 * W * W)
        - px * V * W
        - 0.5 * V * W * W
        + V**3
        + 1.5 * px * I
        - Pv
    )
    dqs = 2.0 * (p + V) * (px + W) * e.qs
    dV0 = -Qv0
    common = V0 + 1.5 * V0 * V0 + V0**3 - Pv0

    def dW0(w, sign):
        return sign * lam * w - 0.5 * lam * w * w + common

    return dq, dV, dW, dqs, dV0, dW0(e.W0_plus, 1.0), dW0(e.W0_minus, -1.0), lam * lam


def vector_field(e: CharacteristicEnsemble) -> CharacteristicEnsemble:
    """Time derivative of every field, returned as an ensemble of rates."""
    dq, dV, dW, dqs, dV0, dWp, dWm, da = _rates(e, *nonlocal_terms(e))
    return replace(e, q=dq, V=dV, W=dW, qs=dqs, V0=dV0, W0_plus=dWp, W0_minus=dWm, a=da, t=1.0)


def _packed_rates(template: CharacteristicEnsemble, jacobian_threshold: float = 0.0):
    def f(y):
        e = template.unpack(y, template.t)
        r = _rates(e, *nonlocal_terms(e, jacobian_threshold))
        return np.concatenate([r[0], r[1], r[2], r[3], r[4:]])

    return f


# -- time stepping ----------------------------------------------------------------


def _breakdown(e: CharacteristicEnsemble, th: Thresholds) -> tuple[str, str]:
    y = e.pack()
    if not np.all(np.isfinite(y)):
        return BREAKDOWN_BLOWUP, "non-finite state"
    slope = max(float(np.max(np.abs(e.W))), abs(e.W0_plus), abs(e.W0_minus))
    if slope > th.slope_blowup:
        return BREAKDOWN_BLOWUP, f"max slope {slope:.3g} > {th.slope_blowup:.3g}"
    qs_min = float(np.min(e.qs))
    if qs_min < th.jacobian:
        return BREAKDOWN_JACOBIAN, f"min q_s {qs_min:.3g} < {th.jacobian:.3g}"
    return OK, ""


MAX_HALVINGS = 40


class _InvalidStep(Exception):
    pass


def _rk4_trial(e: CharacteristicEnsemble, h: float) -> CharacteristicEnsemble:
    f = _packed_rates(e)
    y = e.pack()
    with np.errstate(over="ignore", invalid="ignore"):
        try:
            k1 = f(y)
            k2 = f(y + 0.5 * h * k1)
            k3 = f(y + 0.5 * h * k2)
            k4 = f(y + h * k3)
        except JacobianError as exc:
            raise _InvalidStep(str(exc)) from None
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(y)):
        raise _InvalidStep("non-finite state")
    new = e.unpack(y, e.t + h)
    if not np.min(new.qs) > 0:
        raise _InvalidStep(f"min q_s = {np.min(new.qs):.3g}")
    return new


def _advance(e, h, thresholds, depth):
    try:
        new = _rk4_trial(e, h)
    except _InvalidStep as exc:
        if depth >= MAX_HALVINGS:
            status = BREAKDOWN_JACOBIAN if "q_s" in str(exc) else BREAKDOWN_BLOWUP
            return e, StepOutcome(status, f"{exc} near t = {e.t + h:.9g}", e.t + 0.5 * h)
        mid, out = _advance(e, 0.5 * h, thresholds, depth + 1)
        if not out.ok:
            return mid, out
        return _advance(mid, 0.5 * h, thresholds, depth + 1)
    status, detail = _breakdown(new, thresholds)
    if status != OK:
        return e, StepOutcome(status, f"{detail} at t = {new.t:.9g}", e.t + 0.5 * h)
    return new, StepOutcome()


def step_rk4(
    e: CharacteristicEnsemble, dt: float, thresholds: Thresholds = Thresholds()
) -> tuple[CharacteristicEnsemble, StepOutcome]:
    """One classical RK4 step of the full coupled state.

    A step whose stages leave the admissible set (``q_s <= 0`` or non-finite
    values) is split in halves, recursively, so that approach to a singularity
    is resolved until a threshold fires. On breakdown the last accepted
    ensemble is returned with a terminal outcome timed at the midpoint of the
    rejected step.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return _advance(e, dt, thresholds, 0)


def reconstruct(e: CharacteristicEnsemble) -> PeakedFunction:
    """``u = phi(x - a) + v(x - a)`` in the laboratory frame."""
    sg = e.side
    p = np.exp(-sg * e.q)
    return PeakedFunction(
        e.q + e.a,
        p + e.V,
        -sg * p + e.W,
        1.0 + e.V0,
        -1.0 + e.W0_plus,
        1.0 + e.W0_minus,
        center=e.a,
        check=False,
    )


def _halflines(x, f, fx, f0, fx_minus, fx_plus):
    i = int(np.searchsorted(x, 0.0))
    left = (np.append(x[:i], 0.0), np.append(f[:i], f0), np.append(fx[:i], fx_minus))
    right = (np.insert(x[i:], 0, 0.0), np.insert(f[i:], 0, f0), np.insert(fx[i:], 0, fx_plus))
    return left, right


def _integral(parts, density) -> float:
    return float(sum(np.trapezoid(density(f, fx), x) for x, f, fx in parts))


def _dens_E(f, fx):
    return f * f + fx * fx


def _dens_F(f, fx):
    f2, g2 = f * f, fx * fx
    return f2 * f2 + 2.0 * f2 * g2 - g2 * g2 / 3.0


def _peakon_integrals(x_lo: float, x_hi: float) -> tuple[float, float]:
    """Exact ``E`` and ``F`` densities of the peakon integrated over ``[x_lo, x_hi]`` (``x_lo < 0 < x_hi``)."""
    e2 = -math.expm1(2.0 * x_lo) - math.expm1(-2.0 * x_hi)
    e4 = -math.expm1(4.0 * x_lo) - math.expm1(-4.0 * x_hi)
    return e2, 2.0 * e4 / 3.0


def record(e: CharacteristicEnsemble) -> DiagnosticsRecord:
    """Diagnostics of the current state.

    Integrals are taken directly over the characteristic positions, which stay
    ordered but may coincide to rounding just before a breakdown. For ``E`` and
    ``F`` the peakon's own contribution is integrated exactly and only the
    difference of densities is sampled, since characteristics leaving the peak
    on the left can spread far apart.
    """
    sg = e.side
    p = np.exp(-sg * e.q)
    px = -sg * p
    u_parts = _halflines(e.q, p + e.V, px + e.W, 1.0 + e.V0, 1.0 + e.W0_minus, -1.0 + e.W0_plus)
    phi_parts = _halflines(e.q, p, px, 1.0, 1.0, -1.0)
    v_parts = _halflines(e.q, e.V, e.W, e.V0, e.W0_minus, e.W0_plus)
    E_phi, F_phi = _peakon_integrals(float(e.q[0]), float(e.q[-1]))

    def excess(dens):
        return sum(
            float(np.trapezoid(dens(f, fx) - dens(g, gx), x)) for (x, f, fx), (_, g, gx) in zip(u_parts, phi_parts)
        )

    _, _, _, Qv0, Pv0 = nonlocal_terms(e)
    return DiagnosticsRecord(
        t=e.t,
        E=E_phi + excess(_dens_E),
        F=F_phi + excess(_dens_F),
        h1_v=math.sqrt(_integral(v_parts, _dens_E)),
        linf_vx_plus=float(np.max(np.abs(v_parts[1][2]))),
        linf_vx_minus=float(np.max(np.abs(v_parts[0][2]))),
        V0=e.V0,
        W0_plus=e.W0_plus,
        W0_minus=e.W0_minus,
        a=e.a,
        qs_min=float(np.min(e.qs)),
        pq0=Pv0 + Qv0,
    )


@dataclass
class Trajectory:
    records: list[DiagnosticsRecord] = field(default_factory=list)
    outcome: StepOutcome = field(default_factory=StepOutcome)
    final: CharacteristicEnsemble | None = None

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def evolve(
    e: CharacteristicEnsemble,
    t_end: float,
    dt: float,
    thresholds: Thresholds = Thresholds(),
    record_interval: float | None = None,
    callback=None,
) -> Trajectory:
    """Fixed-step RK4 from ``e.t`` to ``t_end`` or until breakdown.

    A record is taken at the start, every ``record_interval`` (rounded to a
    whole number of steps) and at the final accepted state. ``callback`` is
    called with every accepted ensemble.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    span = t_end - e.t
    steps = max(0, int(round(span / dt)))
    every = steps if record_interval is None else max(1, int(round(record_interval / dt)))
    traj = Trajectory(records=[record(e)])
    for k in range(1, steps + 1):
        e, outcome = step_rk4(e, dt, thresholds)
        if not outcome.ok:
            traj.outcome = outcome
            break
        # pin the clock to the step count so records land on exact multiples
        e = replace(e, t=(t_end - span) + k * dt if k < steps else t_end)
        if callback is not None:
            callback(e)
        if k % every == 0 or k == steps:
            traj.records.append(record(e))
    else:
        traj.outcome = StepOutcome(OK, "", e.t)
    if not traj.outcome.ok and traj.records[-1].t != e.t:
        traj.records.append(record(e))
    traj.final = e
    return traj
