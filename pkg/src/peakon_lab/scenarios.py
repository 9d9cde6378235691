"""Scenario runners behind the command line: each writes CSV artifacts and audits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .characteristics import (
    BREAKDOWN_BLOWUP,
    JACOBIAN_THRESHOLD,
    DiagnosticsRecord,
    Thresholds,
    Trajectory,
    evolve,
    init_ensemble,
    reconstruct,
)
from .config import ExperimentConfig, serialize
from .gridfn import (
    GridError,
    InitialDatumSpec,
    PeakedFunction,
    datum_with_h1_norm,
    format_float,
    h1_norm,
    h1_norm_halfline,
    linf_slope,
    make_grid,
    peakon_function,
    random_datum_spec,
    refine_grid_params,
    w1inf_norm,
    write_snapshot,
)
from .kernel import SampledField, identity_residual_calc, identity_residual_linear, identity_residual_quadratic
from .linear import growth_lower_bound, linear_ode_crosscheck, linear_solution_field, linear_V, linear_W
from .oracle import DirectState, compare, direct_evolve, uniform_grid, write_direct_snapshot

TRAJECTORY_COLUMNS = (
    "t", "E", "F", "H1_v", "Linf_vx_plus", "Linf_vx_minus", "V0", "W0_plus", "W0_minus", "a", "qs_min", "PQ0",
)  # fmt: skip


@dataclass
class Audit:
    name: str
    result: dg.AuditResult


@dataclass
class RunResult:
    audits: list[Audit] = field(default_factory=list)
    report: dict = field(default_factory=dict)

    def check(self, name: str, ok: bool, detail: str) -> None:
        self.audits.append(Audit(name, dg.AuditResult(dg.PASS if ok else dg.FAIL, detail)))

    def add(self, name: str, result: dg.AuditResult) -> None:
        self.audits.append(Audit(name, result))

    @property
    def first_failure(self) -> Audit | None:
        return next((a for a in self.audits if not a.result.passed), None)

    @property
    def exit_code(self) -> int:
        return 0 if self.first_failure is None else 1


def write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else format_float(v) for v in row])


def write_trajectory(path: Path, traj: Trajectory) -> None:
    write_rows(path, TRAJECTORY_COLUMNS, (r.as_tuple() for r in traj.records))


def _grid(cfg: ExperimentConfig, refine: int = 0) -> np.ndarray:
    N, ratio = cfg.N, cfg.ratio
    for _ in range(refine):
        N, ratio = refine_grid_params(N, ratio)
    return make_grid(cfg.L, N, ratio)


def resolved_spec(cfg: ExperimentConfig) -> InitialDatumSpec:
    """The datum family, rescaled on the base grid when an H¹ target is set."""
    spec = cfg.datum_spec()
    if cfg.target_h1 > 0:
        spec = datum_with_h1_norm(spec, _grid(cfg), cfg.target_h1)
    return spec


def initial_datum(cfg: ExperimentConfig, coords: np.ndarray) -> PeakedFunction:
    return resolved_spec(cfg).sample(coords)


# -- identities -------------------------------------------------------------------

IDENTITIES = ("linear", "calc", "quadratic")


def identity_residuals(v: PeakedFunction) -> dict[str, float]:
    return {
        "linear": identity_residual_linear(v),
        "calc": identity_residual_calc(SampledField(v.coords, v.values)),
        "quadratic": identity_residual_quadratic(v),
    }


def identity_cases(cfg: ExperimentConfig):
    """``(name, datum_on(coords))`` pairs: the peakon itself and seeded random data."""
    rng = np.random.default_rng(cfg.seed)
    cases = [("peakon", peakon_function)]
    for k in range(cfg.n_random):
        spec = random_datum_spec(rng)
        cases.append((f"random{k}", spec.sample))
    return cases


def run_identities(cfg: ExperimentConfig, out: Path) -> RunResult:
    res = RunResult()
    coarse, fine = _grid(cfg), _grid(cfg, 1)
    rows = []
    worst = 0.0
    for name, make in identity_cases(cfg):
        r0, r1 = identity_residuals(make(coarse)), identity_residuals(make(fine))
        for ident in IDENTITIES:
            a, b = r0[ident], r1[ident]
            ratio = a / b if b > 0 else math.inf
            rows.append((name, ident, a, b, ratio))
            worst = max(worst, a)
            res.check(f"{ident}:{name}:size", a <= cfg.identity_tol, f"residual {a:.3g} vs {cfg.identity_tol:.3g}")
            if a > cfg.roundoff_floor:
                res.check(
                    f"{ident}:{name}:refinement",
                    ratio >= cfg.refinement_factor,
                    f"refinement ratio {ratio:.3g} vs {cfg.refinement_factor:g}",
                )
    write_rows(out / "identities.csv", ("case", "identity", "residual", "residual_refined", "ratio"), rows)
    res.report["max_residual"] = worst
    return res


# -- linear -------------------------------------------------------------------------


def _record_times(cfg: ExperimentConfig) -> np.ndarray:
    n = max(1, int(round(cfg.t_end / cfg.record_interval)))
    return np.linspace(0.0, cfg.t_end, n + 1)


def run_linear(cfg: ExperimentConfig, out: Path) -> RunResult:
    res = RunResult()
    v0 = initial_datum(cfg, _grid(cfg))
    n0p, n0m = h1_norm_halfline(v0, "plus") ** 2, h1_norm_halfline(v0, "minus") ** 2
    rows = []
    drift_p = drift_m = 0.0
    bound_ok = True
    for t in _record_times(cfg):
        v = linear_solution_field(t, v0)
        hp, hm = h1_norm_halfline(v, "plus") ** 2, h1_norm_halfline(v, "minus") ** 2
        linf, bound = linf_slope(v, "plus"), growth_lower_bound(t, v0)
        rows.append((t, math.sqrt(hp), math.sqrt(hm), linf, bound, v.peak_value + v.slope_right))
        if n0p > 0:
            drift_p = max(drift_p, abs(hp / n0p - 1.0))
        if n0m > 0:
            drift_m = max(drift_m, abs(hm / n0m - 1.0))
        bound_ok &= bound <= linf * (1.0 + 1e-12)
    write_rows(out / "linear.csv", ("t", "H1_plus", "H1_minus", "Linf_vx_plus", "bound", "V0_plus_W0"), rows)
    write_snapshot(out / "snapshot_initial.csv", 0.0, v0)
    write_snapshot(out / "snapshot_final.csv", cfg.t_end, linear_solution_field(cfg.t_end, v0))

    cross = linear_ode_crosscheck(v0, cfg.t_end, min(cfg.dt, 0.1))
    scale = max(1.0, float(np.max(np.abs(linear_W(cfg.t_end, v0.coords, v0)))))
    cross_err = max(
        float(np.max(np.abs(cross.values - linear_V(cfg.t_end, v0.coords, v0)))),
        float(np.max(np.abs(cross.slopes - linear_W(cfg.t_end, v0.coords, v0)))) / scale,
    )
    t = np.array([r[0] for r in rows])
    rate, r2 = dg.fit_exponential_rate(t, [r[5] for r in rows])
    res.report.update(rate=rate, r2=r2, h1_plus_drift=drift_p, h1_minus_drift=drift_m, crosscheck_error=cross_err)
    res.check("lower_bound", bound_ok, "growth lower bound below measured slope norm at every record")
    res.check("h1_plus", drift_p <= cfg.h1_tol, f"drift {drift_p:.3g} vs {cfg.h1_tol:.3g}")
    res.check("h1_minus", drift_m <= cfg.h1_tol, f"drift {drift_m:.3g} vs {cfg.h1_tol:.3g}")
    return res


# -- nonlinear family ----------------------------------------------------------------


def _thresholds(cfg: ExperimentConfig) -> Thresholds:
    return Thresholds(cfg.slope_blowup_threshold, cfg.jacobian_threshold)


def _evolve(cfg: ExperimentConfig, v0: PeakedFunction, dt: float | None = None) -> Trajectory:
    return evolve(init_ensemble(v0), cfg.t_end, dt or cfg.dt, _thresholds(cfg), cfg.record_interval)


def _accepted(traj: Trajectory) -> list[DiagnosticsRecord]:
    """Records of states strictly before any breakdown."""
    return traj.records if traj.outcome.ok else traj.records[:-1] or traj.records[:1]


def _snapshot_final(out: Path, traj: Trajectory) -> None:
    try:
        write_snapshot(out / "snapshot_final.csv", traj.final.t, traj.final.perturbation())
    except GridError:
        # positions have merged to rounding at breakdown; nothing sensible to write
        pass


def _standard(cfg: ExperimentConfig, out: Path, v0: PeakedFunction, traj: Trajectory, res: RunResult) -> None:
    write_trajectory(out / "trajectory.csv", traj)
    write_snapshot(out / "snapshot_initial.csv", 0.0, v0)
    _snapshot_final(out, traj)
    recs = _accepted(traj)
    # conservation is only meaningful while characteristics are resolved
    resolved = [r for r in recs if r.qs_min >= JACOBIAN_THRESHOLD] or recs[:1]
    E = np.array([r.E for r in resolved])
    F = np.array([r.F for r in resolved])
    res.report.update(
        E_drift=dg.relative_drift(E),
        F_drift=dg.relative_drift(F),
        pq_max=float(max(abs(r.pq0) for r in recs)),
        outcome=traj.outcome.status,
    )
    h1_v0 = h1_norm(v0)
    u0x = w1inf_norm(peakon_function(v0.coords)) + max(linf_slope(v0, "plus"), linf_slope(v0, "minus"))
    worst = max(recs, key=lambda r: abs(r.pq0))
    res.add("pq_bound", dg.audit_pq_bound(worst, cfg.eps, u0x, h1_v0, cfg.c0))
    res.add("stability_bound", dg.audit_stability_bound(traj, cfg.eps, u0x, h1_v0))


def run_nonlinear(cfg: ExperimentConfig, out: Path) -> RunResult:
    res = RunResult()
    v0 = initial_datum(cfg, _grid(cfg))
    traj = _evolve(cfg, v0)
    _standard(cfg, out, v0, traj, res)
    res.check("no_breakdown", traj.outcome.ok, traj.outcome.detail or "reached t_end")
    res.check("E_drift", res.report["E_drift"] <= cfg.e_tol, f"{res.report['E_drift']:.3g} vs {cfg.e_tol:.3g}")
    res.check("F_drift", res.report["F_drift"] <= cfg.f_tol, f"{res.report['F_drift']:.3g} vs {cfg.f_tol:.3g}")
    return res


def run_instability(cfg: ExperimentConfig, out: Path) -> RunResult:
    res = RunResult()
    v0 = initial_datum(cfg, _grid(cfg))
    traj = _evolve(cfg, v0)
    _standard(cfg, out, v0, traj, res)
    recs = _accepted(traj)
    t = np.array([r.t for r in recs])
    rate, r2 = dg.fit_exponential_rate(t, [r.V0 + r.W0_plus for r in recs], (cfg.fit_lo, cfg.fit_hi))
    slope_dev = np.array([max(r.linf_vx_plus, r.linf_vx_minus) for r in recs])
    crossed = np.flatnonzero(slope_dev > 1.0)
    t_cross = float(t[crossed[0]]) if crossed.size else math.inf
    res.report.update(rate=rate, r2=r2, t0_estimate=dg.instability_time_estimate(cfg.eps, cfg.c_const), t_cross=t_cross)
    res.report["T_num"] = dg.breakdown_time(traj)
    ok_rate = math.isfinite(rate) and abs(rate - 1.0) <= cfg.rate_tol and r2 >= cfg.r2_min
    res.check("growth_rate", ok_rate, f"rate {rate:.4g}, r2 {r2:.4g}")
    res.check("slope_crossing", crossed.size > 0, f"first crossing of 1 at t={t_cross:.4g}")
    return res


def _blowup_time_converged(cfg: ExperimentConfig, v0: PeakedFunction, traj: Trajectory):
    """Halve dt until the breakdown time moves by less than the tolerance."""
    times = [dg.breakdown_time(traj)]
    dt = cfg.dt
    for _ in range(cfg.max_reruns):
        dt *= 0.5
        times.append(dg.breakdown_time(_evolve(cfg, v0, dt)))
        a, b = times[-2], times[-1]
        if math.isfinite(a) and math.isfinite(b) and abs(b - a) <= cfg.convergence_tol * b:
            return times, True
        if not (math.isfinite(a) or math.isfinite(b)):
            break
    return times, False


def run_blowup(cfg: ExperimentConfig, out: Path) -> RunResult:
    res = RunResult()
    coords = _grid(cfg)
    v0 = initial_datum(cfg, coords)
    traj = _evolve(cfg, v0)
    _standard(cfg, out, v0, traj, res)
    comparison = dg.RiccatiComparison(cfg.eps, v0.slope_right)
    times, converged = _blowup_time_converged(cfg, v0, traj)
    T_num = times[-1]
    res.report.update(T_num=T_num, T_riccati=dg.riccati_blowup_time(comparison), T_num_first=times[0])
    res.report["riccati_threshold"] = dg.riccati_threshold(cfg.eps)
    res.check("blowup", traj.outcome.status == BREAKDOWN_BLOWUP, traj.outcome.detail or "no breakdown")
    res.check("dt_convergence", converged, "breakdown times " + ", ".join(f"{x:.6g}" for x in times))
    res.add("riccati", dg.check_blowup_consistency(T_num, comparison, cfg.riccati_tol))
    if cfg.extra_slope_right != 0.0:
        extra = initial_datum(replace(cfg, slope_right=cfg.extra_slope_right), coords)
        et = _evolve(cfg, extra)
        res.report.update(
            extra_slope_right=cfg.extra_slope_right,
            extra_outcome=et.outcome.status,
            extra_T_num=dg.breakdown_time(et),
            extra_T_riccati=dg.riccati_blowup_time(dg.RiccatiComparison(cfg.eps, cfg.extra_slope_right)),
        )
    return res


# -- direct solver comparison ------------------------------------------------------------


def _oracle_diff(cfg: ExperimentConfig, refine: int, out: Path | None):
    coords = _grid(cfg, refine)
    v0 = initial_datum(cfg, coords)
    dt = cfg.dt / 2**refine
    traj = _evolve(cfg, v0, dt)
    xg = uniform_grid(cfg.L, cfg.oracle_cells * 2**refine)
    g, _ = resolved_spec(cfg).evaluate(xg)
    st = DirectState(xg, np.exp(-np.abs(xg)) + g)
    dx = st.dx
    direct = direct_evolve(st, cfg.t_end, min(dt, 0.4 * dx), cfg.oracle_nu, order=cfg.oracle_order)
    if out is not None:
        write_direct_snapshot(out / "snapshot_direct.csv", direct)
    return traj, v0, compare(direct, reconstruct(traj.final))


def run_oracle_compare(cfg: ExperimentConfig, out: Path) -> RunResult:
    res = RunResult()
    traj, v0, diff = _oracle_diff(cfg, 0, out)
    _standard(cfg, out, v0, traj, res)
    res.report["oracle_diff"] = diff
    res.check("no_breakdown", traj.outcome.ok, traj.outcome.detail or "reached t_end")
    res.check("oracle_diff", diff <= cfg.oracle_tol, f"{diff:.3g} vs {cfg.oracle_tol:.3g}")
    if cfg.oracle_refine:
        _, _, fine = _oracle_diff(cfg, 1, None)
        res.report["oracle_diff_refined"] = fine
        res.check("oracle_refinement", fine < diff, f"{diff:.3g} -> {fine:.3g}")
    return res


RUNNERS = {
    "identities": run_identities,
    "linear": run_linear,
    "nonlinear": run_nonlinear,
    "instability": run_instability,
    "blowup": run_blowup,
    "oracle_compare": run_oracle_compare,
}


def run(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> RunResult:
    """Execute the configured scenario and write manifest, CSVs and report into the output directory."""
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.txt").write_text(serialize(cfg), encoding="utf-8")
    res = RUNNERS[cfg.scenario](cfg, out)
    fail = res.first_failure
    report = dict(res.report)
    report["status"] = "pass" if fail is None else "fail"
    report["first_failure"] = "none" if fail is None else f"{fail.name}: {fail.result.detail}"
    write_rows(
        out / "audits.csv",
        ("audit", "status", "detail"),
        ((a.name, a.result.status, a.result.detail) for a in res.audits),
    )
    dg.write_report(out / "report.txt", report)
    return res
