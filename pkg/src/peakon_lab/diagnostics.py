"""Growth-rate fits, the Riccati comparison for the peak slope, and run audits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import linregress

from .characteristics import BREAKDOWN_BLOWUP, DiagnosticsRecord, Trajectory
from .gridfn import format_float

PASS, FAIL, SKIPPED = "pass", "fail", "skipped"
DEFAULT_C0 = 50.0
REPORT_KEYS = ("rate", "r2", "t0_estimate", "T_num", "T_riccati", "pq_max", "E_drift", "F_drift")


@dataclass(frozen=True)
class AuditResult:
    status: str
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status != FAIL


@dataclass(frozen=True)
class RiccatiComparison:
    """``dy/dt = -a_coef (y - 1)² + b_coef`` bounding the right slope at the peak from above."""

    eps: float
    y0: float

    def __post_init__(self):
        if not (0.0 < self.eps < 1.0 / 12.0):
            raise ValueError(f"eps must lie in (0, 1/12), got {self.eps}")
        if not math.isfinite(self.y0):
            raise ValueError("y0 must be finite")

    @property
    def a_coef(self) -> float:
        return 0.5 * (1.0 - 12.0 * self.eps)

    @property
    def b_coef(self) -> float:
        return 0.5 + 20.0 * self.eps

    def rhs(self, y):
        return -self.a_coef * (y - 1.0) ** 2 + self.b_coef


def riccati_threshold(eps: float) -> float:
    """Initial slopes strictly below this value blow up in the comparison equation."""
    r = RiccatiComparison(eps, 0.0)
    return 1.0 - math.sqrt(r.b_coef / r.a_coef)


def riccati_blowup_time(r: RiccatiComparison) -> float:
    """Time at which the comparison solution reaches ``-inf``; ``inf`` if it never does.

    With ``z = y - 1`` and ``k = sqrt(b/a)`` the solution satisfies
    ``(z - k)/(z + k) = C e^{-2 a k t}``, which diverges when ``z + k`` reaches 0
    from below.
    """
    k = math.sqrt(r.b_coef / r.a_coef)
    z0 = r.y0 - 1.0
    if not z0 < -k:
        return math.inf
    return math.log((z0 - k) / (z0 + k)) / (2.0 * r.a_coef * k)


def breakdown_time(traj: Trajectory) -> float:
    """Blow-up time of a trajectory, ``inf`` if it did not end in slope blow-up."""
    return traj.outcome.time if traj.outcome.status == BREAKDOWN_BLOWUP else math.inf


def check_blowup_consistency(T_num: float, r: RiccatiComparison, rel_tol: float = 0.1) -> AuditResult:
    """The solver must not outlive the comparison solution by more than ``rel_tol``."""
    T_ric = riccati_blowup_time(r)
    if math.isinf(T_ric):
        return AuditResult(PASS, f"comparison does not blow up; T_num={T_num:.6g}")
    if T_num <= T_ric * (1.0 + rel_tol):
        return AuditResult(PASS, f"T_num={T_num:.6g} <= T_riccati={T_ric:.6g}")
    return AuditResult(FAIL, f"T_num={T_num:.6g} exceeds T_riccati={T_ric:.6g}")


def growth_signal(traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """Record times and ``|V0 + W0_plus|``."""
    return traj.column("t"), np.abs(traj.column("V0") + traj.column("W0_plus"))


def fit_exponential_rate(t, signal, window: tuple[float, float] | None = None) -> tuple[float, float]:
    """Least-squares slope of ``log|signal|`` and its ``r²``.

    With ``window=(lo, hi)`` only samples with ``lo <= |signal| <= hi`` are used.
    Fewer than three usable samples give ``(nan, nan)``.
    """
    t = np.asarray(t, dtype=float)
    y = np.abs(np.asarray(signal, dtype=float))
    keep = np.isfinite(y) & (y > 0)
    if window is not None:
        keep &= (y >= window[0]) & (y <= window[1])
    if np.count_nonzero(keep) < 3:
        return math.nan, math.nan
    logy = np.log(y[keep])
    if np.ptp(logy) == 0.0:
        return 0.0, 1.0
    fit = linregress(t[keep], logy)
    return float(fit.slope), float(fit.rvalue**2)


def instability_time_estimate(eps: float, c_const: float) -> float:
    """``log(2 / (C eps²))``, the time after which the peak slope perturbation exceeds 2."""
    if not (eps > 0 and c_const > 0):
        raise ValueError("eps and c_const must be positive")
    return math.log(2.0 / (c_const * eps * eps))


def admissible_eps(h1_v0: float) -> float:
    """Smallest ``eps`` for which ``‖v0‖_{H¹} < eps⁴`` holds (up to rounding)."""
    return math.nextafter(h1_v0 ** 0.25, math.inf)


def pq_bound(eps: float, u0x_linf: float, c0: float = DEFAULT_C0) -> float:
    return c0 * eps * eps * (1.0 + u0x_linf**1.5 + eps * u0x_linf**2)


def audit_pq_bound(
    rec: DiagnosticsRecord, eps: float, u0x_linf: float, h1_v0: float, c0: float = DEFAULT_C0
) -> AuditResult:
    """Check ``|P[v](0) + Q[v](0)|`` against its small-data bound.

    The bound is only claimed when ``‖v0‖_{H¹} < eps⁴``; otherwise the audit is
    skipped.
    """
    if not h1_v0 < eps**4:
        return AuditResult(SKIPPED, f"‖v0‖_H1={h1_v0:.3g} not below eps^4={eps**4:.3g}")
    bound = pq_bound(eps, u0x_linf, c0)
    if abs(rec.pq0) <= bound:
        return AuditResult(PASS, f"|pq0|={abs(rec.pq0):.3g} <= {bound:.3g} at t={rec.t:.6g}")
    return AuditResult(FAIL, f"|pq0|={abs(rec.pq0):.3g} > {bound:.3g} at t={rec.t:.6g}")


def audit_stability_bound(traj: Trajectory, eps: float, u0x_linf: float, h1_v0: float) -> AuditResult:
    """``‖v(t)‖_{H¹} < 2 (4 + ‖u0x‖_∞^{1/2}) eps`` along the recorded trajectory."""
    if not h1_v0 < eps**4:
        return AuditResult(SKIPPED, f"‖v0‖_H1={h1_v0:.3g} not below eps^4={eps**4:.3g}")
    bound = 2.0 * (4.0 + math.sqrt(u0x_linf)) * eps
    accepted = traj.records if traj.outcome.ok else traj.records[:-1]
    for rec in accepted:
        if not rec.h1_v < bound:
            return AuditResult(FAIL, f"‖v‖_H1={rec.h1_v:.3g} >= {bound:.3g} at t={rec.t:.6g}")
    return AuditResult(PASS, f"‖v‖_H1 below {bound:.3g}")


def relative_drift(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    return float(np.max(np.abs(values - values[0])) / abs(values[0]))


def write_report(path, values: dict) -> None:
    """Flat ``key = value`` block with the standard keys first, then any extras."""
    keys = list(REPORT_KEYS) + [k for k in values if k not in REPORT_KEYS]
    lines = []
    for k in keys:
        v = values.get(k, math.nan)
        lines.append(f"{k} = {format_float(v) if isinstance(v, float) else v}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_report(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out
