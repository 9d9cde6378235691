import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from peakon_lab.characteristics import DiagnosticsRecord, StepOutcome, Trajectory
from peakon_lab.diagnostics import (
    FAIL,
    PASS,
    REPORT_KEYS,
    SKIPPED,
    RiccatiComparison,
    admissible_eps,
    audit_pq_bound,
    audit_stability_bound,
    check_blowup_consistency,
    fit_exponential_rate,
    instability_time_estimate,
    pq_bound,
    read_report,
    relative_drift,
    riccati_blowup_time,
    riccati_threshold,
    write_report,
)


def _riccati_oracle(eps, y0):
    """Integrate r = 1/(y - 1), r' = a - b r², until r reaches 0 from below."""
    r = RiccatiComparison(eps, y0)
    a, b = r.a_coef, r.b_coef

    def hit(t, y):
        return y[0]

    hit.terminal = True
    hit.direction = 1
    sol = solve_ivp(lambda t, y: [a - b * y[0] ** 2], (0, 100), [1.0 / (y0 - 1.0)], events=hit, rtol=1e-12, atol=1e-14)
    return sol.t_events[0][0] if sol.t_events[0].size else math.inf


def test_coefficients():
    r = RiccatiComparison(0.05, -2.0)
    assert (r.a_coef, r.b_coef) == pytest.approx((0.2, 1.5), rel=1e-15)
    assert r.rhs(1.0) == pytest.approx(1.5)


@pytest.mark.parametrize("eps", [0.0, 1.0 / 12.0, -0.1, 0.2])
def test_invalid_eps(eps):
    with pytest.raises(ValueError):
        RiccatiComparison(eps, -2.0)


def test_threshold_value():
    assert riccati_threshold(0.05) == pytest.approx(1 - math.sqrt(7.5), abs=1e-12)
    assert riccati_threshold(0.05) == pytest.approx(-1.7386, abs=1e-4)


def test_blowup_time_value():
    assert riccati_blowup_time(RiccatiComparison(0.05, -2.0)) == pytest.approx(2.8198, abs=1e-4)


@pytest.mark.parametrize("eps,y0", [(0.05, -3.0), (0.05, -2.0), (0.01, -5.0), (0.07, -20.0)])
def test_blowup_time_matches_oracle(eps, y0):
    assert riccati_blowup_time(RiccatiComparison(eps, y0)) == pytest.approx(_riccati_oracle(eps, y0), abs=1e-6)


def test_no_blowup_above_threshold():
    th = riccati_threshold(0.05)
    assert math.isinf(riccati_blowup_time(RiccatiComparison(0.05, th)))
    assert math.isinf(riccati_blowup_time(RiccatiComparison(0.05, -1.5)))
    assert math.isinf(riccati_blowup_time(RiccatiComparison(0.05, 0.0)))


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 0.08), st.floats(0.01, 50.0), st.floats(0.01, 10.0))
def test_blowup_time_decreases_with_steeper_data(eps, gap, extra):
    y0 = riccati_threshold(eps) - gap
    t1 = riccati_blowup_time(RiccatiComparison(eps, y0))
    t2 = riccati_blowup_time(RiccatiComparison(eps, y0 - extra))
    assert 0 < t2 < t1 < math.inf


def test_blowup_consistency():
    r = RiccatiComparison(0.05, -2.0)
    assert check_blowup_consistency(2.5, r).status == PASS
    assert check_blowup_consistency(3.0, r).status == PASS
    assert check_blowup_consistency(3.2, r).status == FAIL
    assert check_blowup_consistency(10.0, RiccatiComparison(0.05, -1.0)).status == PASS


def test_fit_recovers_rate():
    t = np.linspace(0, 5, 51)
    rate, r2 = fit_exponential_rate(t, 1e-4 * np.exp(2 * t))
    assert rate == pytest.approx(2.0, rel=1e-12) and r2 == pytest.approx(1.0)
    rate, _ = fit_exponential_rate(t, -1e-4 * np.exp(2 * t), window=(1e-3, 1e-1))
    assert rate == pytest.approx(2.0, rel=1e-12)


def test_fit_degenerate_inputs():
    t = np.linspace(0, 1, 10)
    assert fit_exponential_rate(t, np.full(10, 0.5)) == (0.0, 1.0)
    assert all(math.isnan(x) for x in fit_exponential_rate(t, np.zeros(10)))
    assert all(math.isnan(x) for x in fit_exponential_rate(t, np.exp(t), window=(100, 200)))


def test_instability_time_estimate():
    assert instability_time_estimate(0.1, 1.0) == pytest.approx(math.log(200), rel=1e-15)
    assert instability_time_estimate(0.1, 1.0) == pytest.approx(5.298, abs=1e-3)
    with pytest.raises(ValueError):
        instability_time_estimate(0.0, 1.0)


def _rec(t=0.0, pq0=0.0, h1=0.0):
    return DiagnosticsRecord(t, 2.0, 4 / 3, h1, 0, 0, 0, 0, 0, 0, 1, pq0)


def test_pq_audit():
    eps = 0.05
    bound = pq_bound(eps, 1.0)
    assert bound == pytest.approx(50 * 0.0025 * 2.05)
    assert audit_pq_bound(_rec(pq0=0.5 * bound), eps, 1.0, 1e-7).status == PASS
    assert audit_pq_bound(_rec(pq0=-2 * bound), eps, 1.0, 1e-7).status == FAIL
    assert audit_pq_bound(_rec(pq0=0.0), eps, 1.0, 1e-3).status == SKIPPED
    assert audit_pq_bound(_rec(pq0=0.0), eps, 1.0, 1e-3).passed


def test_admissible_eps():
    eps = admissible_eps(0.05)
    assert 0.05 < eps**4 and eps == pytest.approx(0.05**0.25)


def test_stability_audit():
    eps = 0.1
    bound = 2 * (4 + 1) * eps
    ok = Trajectory([_rec(0, h1=1e-5), _rec(1, h1=0.5 * bound)], StepOutcome())
    bad = Trajectory([_rec(0, h1=1e-5), _rec(1, h1=bound)], StepOutcome())
    assert audit_stability_bound(ok, eps, 1.0, 1e-5).status == PASS
    assert audit_stability_bound(bad, eps, 1.0, 1e-5).status == FAIL
    assert audit_stability_bound(bad, eps, 1.0, 1.0).status == SKIPPED


def test_relative_drift():
    assert relative_drift([2.0, 2.002, 1.999]) == pytest.approx(1e-3)


def test_report_round_trip(tmp_path):
    path = tmp_path / "report.txt"
    write_report(path, {"rate": 1.0, "T_num": math.inf, "status": "pass"})
    out = read_report(path)
    assert list(out)[: len(REPORT_KEYS)] == list(REPORT_KEYS)
    assert float(out["rate"]) == 1.0 and float(out["T_num"]) == math.inf
    assert math.isnan(float(out["r2"])) and out["status"] == "pass"
