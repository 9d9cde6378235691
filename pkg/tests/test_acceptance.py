"""One test per acceptance criterion; each prints a single PASS/FAIL line."""

import filecmp
import math
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from peakon_lab import diagnostics as dg
from peakon_lab.characteristics import BREAKDOWN_BLOWUP, Thresholds, evolve, init_ensemble
from peakon_lab.config import ExperimentConfig, parse_config
from peakon_lab.gridfn import (
    InitialDatumSpec,
    datum_with_h1_norm,
    h1_norm_halfline,
    linf_slope,
    make_grid,
    peakon_function,
    refine_grid_params,
)
from peakon_lab.linear import (
    char_position,
    growth_lower_bound,
    linear_ode_crosscheck,
    linear_solution_field,
    linear_V,
    linear_W,
    peak_slopes,
)
from peakon_lab.scenarios import resolved_spec, run

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def config(name: str, **overrides) -> ExperimentConfig:
    return parse_config((CONFIGS / f"{name}.cfg").read_text()).with_overrides(**overrides)


def verdict(n: int, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_01_identity_suite(tmp_path):
    cfg = config("identities")
    assert cfg.N == 2000 and cfg.n_random == 5
    start = time.perf_counter()
    res = run(cfg, tmp_path)
    elapsed = time.perf_counter() - start
    size = [a for a in res.audits if a.name.endswith(":size")]
    refinement = [a for a in res.audits if a.name.endswith(":refinement")]
    ok = res.exit_code == 0 and len(size) == 18 and elapsed < 10.0
    verdict(
        1,
        ok,
        f"max residual {res.report['max_residual']:.3g} over {len(size)} checks, "
        f"{len(refinement)} refinement ratios >= 3, {elapsed:.2f} s",
    )


def test_criterion_02_closed_form_vs_ode(generic_datum):
    t = 2.0
    x = generic_datum.coords

    def error(dt):
        out = linear_ode_crosscheck(generic_datum, t, dt)
        return max(
            float(np.max(np.abs(out.coords - char_position(t, x)))),
            float(np.max(np.abs(out.values - linear_V(t, x, generic_datum)))),
            float(np.max(np.abs(out.slopes - linear_W(t, x, generic_datum)))),
        )

    err = error(1e-3)
    ratio = error(0.1) / error(0.05)
    verdict(2, err <= 1e-6 and 12 <= ratio <= 20, f"sup error {err:.3g} at dt=1e-3, RK4 ratio {ratio:.2f}")


def _linear_drift(v0, times):
    ref = [h1_norm_halfline(v0, side) ** 2 for side in ("plus", "minus")]
    worst = [0.0, 0.0]
    for t in times:
        v = linear_solution_field(t, v0)
        for k, side in enumerate(("plus", "minus")):
            worst[k] = max(worst[k], abs(h1_norm_halfline(v, side) ** 2 / ref[k] - 1))
    return worst


def test_criterion_03_linear_h1_conservation():
    cfg = config("linear")
    times = np.linspace(0, 5, 51)
    spec = cfg.datum_spec()
    base = _linear_drift(spec.sample(make_grid(cfg.L, cfg.N, cfg.ratio)), times)
    N, r = refine_grid_params(cfg.N, cfg.ratio)
    fine = _linear_drift(spec.sample(make_grid(cfg.L, N, r)), times)
    ratios = [b / f for b, f in zip(base, fine)]
    ok = max(base) <= 1e-4 and min(ratios) >= 3
    verdict(
        3,
        ok,
        f"drift plus {base[0]:.3g} minus {base[1]:.3g}, refinement ratios {ratios[0]:.2f} / {ratios[1]:.2f}",
    )


def test_criterion_04_linear_growth(grid):
    v0 = config("linear").datum_spec().sample(grid)
    assert v0.peak_value == 0.0 and v0.slope_right == -1e-2
    margins = []
    for t in np.linspace(0, 5, 51):
        measured = linf_slope(linear_solution_field(t, v0), "plus")
        margins.append(measured - 1e-2 * math.exp(t))
    limit_err = approach_err = peakon_err = 0.0
    phi = peakon_function(grid)
    for t in np.linspace(0, 5, 11):
        formula = v0.peak_value * (math.exp(t) - 1) + v0.slope_right * math.exp(t)
        limit_err = max(limit_err, abs(peak_slopes(t, v0)[0] - formula) / abs(formula))
        peakon_err = max(peakon_err, abs(peak_slopes(t, phi)[0] + 1.0))
        # the closed form near s = 0 cancels terms of size e^{2t}
        cond = math.exp(2 * t)
        approach_err = max(
            approach_err,
            abs(linear_W(t, 1e-300, v0) - formula) / cond,
            abs(linear_W(t, 1e-300, phi) + 1.0) / cond,
        )
        assert growth_lower_bound(t, v0) == pytest.approx(1e-2 * math.exp(t))
    eps = np.finfo(float).eps
    ok = min(margins) >= -1e-15 and max(limit_err, peakon_err) <= 4 * eps and approach_err <= 16 * eps
    verdict(
        4,
        ok,
        f"min margin over bound {min(margins):.3g}, limit rel error {limit_err:.2g}, peakon limit error "
        f"{peakon_err:.2g}, closed form at s=0+ within {approach_err / eps:.2g} eps of e^(2t)",
    )


def test_criterion_05_steady_peakon(grid):
    traj = evolve(init_ensemble(InitialDatumSpec().sample(grid)), 5.0, 0.01)
    f = traj.final
    dev = max(
        float(np.max(np.abs(f.V))), float(np.max(np.abs(f.W))), abs(f.V0), abs(f.W0_plus), abs(f.W0_minus)
    )
    a_err = abs(f.a - 5.0)
    ok = traj.outcome.ok and f.t == 5.0 and dev <= 1e-10 and a_err <= 1e-8
    verdict(5, ok, f"max perturbation {dev:.3g}, |a - t| {a_err:.3g} at t=5")


def _conservation_drifts(cfg, spec, N, ratio, dt):
    v0 = spec.sample(make_grid(cfg.L, N, ratio))
    traj = evolve(init_ensemble(v0), cfg.t_end, dt, Thresholds(), cfg.record_interval)
    assert traj.outcome.ok
    return dg.relative_drift(traj.column("E")), dg.relative_drift(traj.column("F"))


def test_criterion_06_nonlinear_conservation():
    cfg = config("nonlinear")
    spec = resolved_spec(cfg)
    assert math.sqrt(
        sum(h1_norm_halfline(spec.sample(make_grid(cfg.L, cfg.N, cfg.ratio)), s) ** 2 for s in ("plus", "minus"))
    ) == pytest.approx(0.05, rel=1e-12)
    E0, F0 = _conservation_drifts(cfg, spec, cfg.N, cfg.ratio, cfg.dt)
    N, r = refine_grid_params(cfg.N, cfg.ratio)
    E1, F1 = _conservation_drifts(cfg, spec, N, r, cfg.dt / 2)
    ok = E0 <= 1e-3 and F0 <= 3e-3 and E0 / E1 >= 3 and F0 / F1 >= 3
    verdict(
        6,
        ok,
        f"E drift {E0:.3g} -> {E1:.3g} ({E0 / E1:.2f}x), F drift {F0:.3g} -> {F1:.3g} ({F0 / F1:.2f}x)",
    )


def test_criterion_07_linear_nonlinear_consistency(grid, generic_spec):
    spec = datum_with_h1_norm(generic_spec, grid, 1e-4)
    v0 = spec.sample(grid)
    traj = evolve(init_ensemble(v0), 1.0, 0.01, Thresholds(), 0.05)
    t = traj.column("t")
    measured = traj.column("V0") + traj.column("W0_plus")
    predicted = np.exp(t) * (v0.peak_value + v0.slope_right)
    err = float(np.max(np.abs(measured / predicted - 1)))
    verdict(7, traj.outcome.ok and err <= 0.01, f"max relative mismatch {err:.3g} over t in [0, 1]")


def test_criterion_08_instability(tmp_path):
    cfg = config("instability")
    res = run(cfg, tmp_path)
    rep = res.report
    rate, r2, t_cross = rep["rate"], rep["r2"], rep["t_cross"]
    ok = abs(rate - 1.0) <= 0.1 and r2 >= 0.99 and t_cross <= min(cfg.t_end, rep["T_num"])
    verdict(
        8,
        ok,
        f"rate {rate:.4f}, r2 {r2:.5f}, slope deviation crosses 1 at t={t_cross:.3g} "
        f"(breakdown {rep['T_num']:.3g}, estimate {rep['t0_estimate']:.3g})",
    )


def test_criterion_09_blowup(tmp_path):
    cfg = config("blowup")
    res = run(cfg, tmp_path)
    rep = res.report
    assert cfg.slope_right == -2.0 and cfg.eps == 0.05
    T_num, T_ric = rep["T_num"], rep["T_riccati"]
    times = [a for a in res.audits if a.name == "dt_convergence"][0]
    blew_up = [a for a in res.audits if a.name == "blowup"][0].result.status == dg.PASS
    ok = blew_up and times.result.status == dg.PASS and T_num <= 1.1 * T_ric
    verdict(
        9,
        ok,
        f"{BREAKDOWN_BLOWUP} at T_num={T_num:.5f} <= 1.1*T_riccati={1.1 * T_ric:.4f} "
        f"({times.result.detail}); -1.5 datum: {rep['extra_outcome']} at T={rep['extra_T_num']:.4g}, "
        f"T_riccati={rep['extra_T_riccati']}",
    )


def test_criterion_10_oracle_cross_check(tmp_path):
    cfg = config("oracle_compare")
    res = run(cfg, tmp_path)
    coarse = run(cfg.with_overrides(oracle_cells=2000, N=500, ratio=1.012, oracle_refine=False), tmp_path / "c")
    diffs = [coarse.report["oracle_diff"], res.report["oracle_diff"], res.report["oracle_diff_refined"]]
    monotone = all(b < a for a, b in zip(diffs, diffs[1:]))
    ok = res.report["oracle_diff"] <= 1e-2 and monotone
    verdict(10, ok, "sup difference " + " -> ".join(f"{d:.3g}" for d in diffs) + " under refinement")


SHORT = {
    "identities": dict(n_random=2),
    "linear": dict(t_end=1.0),
    "nonlinear": dict(t_end=0.2),
    "instability": dict(t_end=0.5),
    "blowup": dict(extra_slope_right=0.0, max_reruns=1),
    "oracle_compare": dict(t_end=0.05, oracle_cells=2000, oracle_refine=False),
}


def test_criterion_11_determinism(tmp_path):
    mismatched = []
    n_files = 0
    for name, kw in SHORT.items():
        cfg = config(name, **kw)
        a, b = tmp_path / name / "a", tmp_path / name / "b"
        run(cfg, a)
        run(cfg, b)
        files = sorted(p.name for p in a.iterdir() if p.suffix == ".csv")
        n_files += len(files)
        _, mismatch, errors = filecmp.cmpfiles(a, b, files, shallow=False)
        mismatched += [f"{name}/{f}" for f in mismatch + errors]
    verdict(11, not mismatched and n_files > 0, f"{n_files} CSV files over {len(SHORT)} scenarios, mismatches {mismatched}")
