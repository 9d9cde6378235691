import numpy as np
import pytest

from peakon_lab.gridfn import InitialDatumSpec, make_grid, peakon_function
from peakon_lab.kernel import BoundaryDecayError
from peakon_lab.oracle import (
    DirectState,
    compare,
    direct_energy,
    direct_evolve,
    direct_rhs,
    uniform_grid,
    upwind_slope,
    write_direct_snapshot,
)


def test_state_validation():
    x = uniform_grid(25.0, 10)
    with pytest.raises(ValueError):
        DirectState(x, np.zeros(5))
    with pytest.raises(ValueError):
        DirectState(x**3, np.zeros_like(x))
    with pytest.raises(ValueError):
        DirectState(x, np.full_like(x, np.nan))
    assert DirectState(x, np.zeros_like(x)).dx == pytest.approx(5.0)


@pytest.mark.parametrize("order,tol", [(1, 5e-2), (3, 2e-5), (5, 1e-7)])
def test_upwind_slope_order(order, tol):
    x = uniform_grid(25.0, 2000)
    u = np.exp(-((x - 1) ** 2))
    err = np.max(np.abs(upwind_slope(u, x[1] - x[0], order) - (-2 * (x - 1) * u)))
    assert err < tol
    with pytest.raises(ValueError):
        upwind_slope(u, 1.0, 2)


def test_zero_stays_zero():
    x = uniform_grid(25.0, 200)
    out = direct_evolve(DirectState(x, np.zeros_like(x)), 1.0, 0.05)
    assert not np.any(out.u) and out.t == 1.0


def test_peakon_travels_at_unit_speed():
    x = uniform_grid(25.0, 4000)
    u = np.exp(-np.abs(x))
    r = direct_rhs(DirectState(x, u))
    px = -np.sign(x) * u
    away = np.abs(x) > 0.5
    assert np.max(np.abs(r + px)[away]) < 1e-3


def test_rhs_is_odd_in_u():
    x = uniform_grid(25.0, 400)
    u = 0.1 * np.exp(-((x - 0.5) ** 2)) + 0.05 * np.exp(-np.abs(x + 1))
    for order in (1, 3, 5):
        r1 = direct_rhs(DirectState(x, u), order=order)
        r2 = direct_rhs(DirectState(x, -u), order=order)
        assert np.max(np.abs(r1 + r2)) <= 1e-15


def test_energy_conserved_for_smooth_small_datum():
    x = uniform_grid(25.0, 2000)
    st = DirectState(x, 0.1 * np.exp(-((x - 0.5) ** 2)))
    e0 = direct_energy(st)
    e1 = direct_energy(direct_evolve(st, 1.0, 0.01))
    assert abs(e1 / e0 - 1) < 1e-4


def test_boundary_decay_enforced():
    x = uniform_grid(25.0, 100)
    with pytest.raises(BoundaryDecayError):
        direct_rhs(DirectState(x, np.ones_like(x)))


def test_evolve_rejects_bad_arguments():
    x = uniform_grid(25.0, 100)
    st = DirectState(x, np.zeros_like(x))
    with pytest.raises(ValueError):
        direct_evolve(st, 1.0, 0.0)
    with pytest.raises(ValueError):
        direct_evolve(st, 1.0, 0.1, nu=-1.0)


def test_viscosity_damps_energy():
    x = uniform_grid(25.0, 400)
    st = DirectState(x, 0.1 * np.exp(-(x**2)))
    assert direct_energy(direct_evolve(st, 0.5, 0.01, nu=0.1)) < direct_energy(st)


def test_compare():
    g = make_grid(25.0, 2000, 1.003)
    x = uniform_grid(25.0, 4000)
    u = peakon_function(g)
    assert compare(DirectState(x, np.exp(-np.abs(x))), u) < 1e-4
    shift = 0.01
    d = compare(DirectState(x, np.exp(-np.abs(x - shift))), u)
    assert 0.5 * shift < d < 1.5 * shift


def test_compare_ignores_peak_window():
    g = make_grid(25.0, 2000, 1.003)
    x = uniform_grid(25.0, 4000)
    u = InitialDatumSpec("scaled_peakon", amplitude=1.0).sample(g)
    bumped = np.exp(-np.abs(x))
    bumped[np.argmin(np.abs(x))] += 1.0
    assert compare(DirectState(x, bumped), u) < 1e-4


def test_snapshot(tmp_path):
    x = uniform_grid(25.0, 4)
    write_direct_snapshot(tmp_path / "s.csv", DirectState(x, np.zeros_like(x), 0.5))
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "# t=0.5" and lines[1] == "x,v" and len(lines) == 7
