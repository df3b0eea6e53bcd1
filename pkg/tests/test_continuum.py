import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from aggdiff.continuum import (
    BumpTestFunction,
    ContinuumState,
    SolverOverflowError,
    StabilityError,
    diagnostics,
    illposedness_probe,
    l2_decay_fit,
    min_principle_check,
    pde_simulate,
    pde_step,
    stability_bound,
    stable_dt,
    top_mode_amplitude,
    weak_energy,
    weak_form_residual,
)
from aggdiff.lattice import LatticeState, simulate
from aggdiff.profiles import resolve

from oracles import loop_flux_step

WELL = "0.75+0.1*cos(pi*x)"
ILL = "0.25+0.1*cos(3*pi*x)"


@pytest.fixture(scope="module")
def well_run():
    return pde_simulate(ContinuumState.from_profile(WELL, 200, 1e-3), 5.0, 0.05)


def test_state_validation():
    with pytest.raises(ValueError):
        ContinuumState([0.5], 1.0)
    with pytest.raises(ValueError):
        ContinuumState([0.5, 0.5], 0.3)
    with pytest.raises(ValueError):
        ContinuumState([0.5, 0.5], 0.5, epsilon=-1)
    with pytest.raises(SolverOverflowError):
        ContinuumState([0.5, math.nan], 0.5)
    s = ContinuumState.from_profile("constant 0.3", 4)
    np.testing.assert_allclose(s.x, [0.125, 0.375, 0.625, 0.875])


def test_step_matches_loop_oracle():
    u = [0.6, 0.7, 0.8, 0.7]
    s = ContinuumState(u, 0.25, 0.01)
    dt = stable_dt(s)
    out = pde_step(s, dt)
    np.testing.assert_allclose(out.cells, loop_flux_step(u, 0.01, dt), atol=1e-15, rtol=0)
    assert out.time == dt


@settings(max_examples=50)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=40), st.floats(0, 0.1))
def test_step_conserves_mass_and_matches_oracle(u, eps):
    s = ContinuumState(u, 1 / len(u), eps)
    dt = stable_dt(s)
    if not math.isfinite(dt):
        dt = 1e-3
    out = pde_step(s, dt)
    m0, m1 = s.h * np.sum(s.cells), out.h * np.sum(out.cells)
    assert abs(m1 - m0) <= 1e-13 * max(1.0, abs(m0))
    np.testing.assert_allclose(out.cells, loop_flux_step(u, eps, dt), atol=1e-13)


def test_constant_state_unchanged():
    s = ContinuumState.from_profile("constant 0.3", 10, 0.0)
    assert stability_bound(s) > 0
    out = pde_step(s, 1e-3)
    np.testing.assert_array_equal(out.cells, s.cells)


def test_stability_error():
    s = ContinuumState.from_profile(WELL, 50)
    with pytest.raises(StabilityError):
        pde_step(s, 1.01 * stability_bound(s))
    pde_step(s, stability_bound(s))
    with pytest.raises(ValueError):
        pde_step(s, 0.0)


def test_stable_dt_safety_factor():
    s = ContinuumState.from_profile(WELL, 50, 1e-3)
    u = s.cells
    coef = (0.5 * (u[1:] + u[:-1])) ** 2 * (0.5 * (u[1:] + u[:-1]) - 0.5) + 1e-3
    assert stable_dt(s) == pytest.approx(0.4 * s.h**2 / coef.max(), rel=1e-14)


def test_overflow_without_cap():
    s = ContinuumState.from_profile(ILL, 400, 0.0)
    with pytest.raises(SolverOverflowError):
        pde_simulate(s, 0.05, 0.05)


def test_blowup_cap_stops_run():
    res = pde_simulate(ContinuumState.from_profile(ILL, 400, 0.0), 0.05, 0.05, blowup_cap=1e6)
    assert res.blew_up and res.t_stop < 0.05


def test_constant_simulation():
    res = pde_simulate(ContinuumState.from_profile("constant 0.8", 20), 1.0, 0.1)
    np.testing.assert_array_equal(res.final.cells, 0.8)
    assert all(s.l2_to_mean < 1e-30 for s in res.samples)
    assert len(res.samples) == 11 and res.samples[-1].time == 1.0


def test_samples_land_on_cadence():
    res = pde_simulate(ContinuumState.from_profile(WELL, 40), 0.3, 0.1)
    assert [s.time for s in res.samples] == pytest.approx([0, 0.1, 0.2, 0.3], abs=1e-15)


def test_well_posed_decay(well_run):
    s = well_run.samples
    assert s[-1].l2_to_mean < 1e-6
    slope, r2 = l2_decay_fit(s)
    assert slope < 0 and r2 >= 0.99
    assert max(abs(x.mass - s[0].mass) for x in s) <= 1e-10 * s[0].mass
    assert np.all(np.diff(well_run.series("energy")) <= 1e-12)
    for x in s:
        assert min(x.mass, x.energy, x.weak_energy, x.l2_to_mean) >= 0


def test_min_principle(well_run):
    v = min_principle_check(well_run)
    assert v.passed and v.min_nondecreasing
    near = pde_simulate(ContinuumState.from_profile("0.51+0.005*cos(2*pi*x)", 100, 1e-4), 1.0, 0.05)
    assert min_principle_check(near).passed
    flat = pde_simulate(ContinuumState.from_profile("constant 0.7", 10), 0.1, 0.05)
    assert min_principle_check(flat).passed


def test_min_principle_not_applicable_below_threshold():
    res = pde_simulate(ContinuumState.from_profile("constant 0.3", 10), 0.1, 0.05)
    v = min_principle_check(res)
    assert not v.applicable and not v.passed


@settings(max_examples=15)
@given(st.floats(0.52, 0.85), st.floats(0.0, 0.14), st.integers(1, 4), st.sampled_from([1e-4, 1e-3, 1e-2]))
def test_energy_nonincreasing_above_threshold(a, b, k, eps):
    s = ContinuumState.from_profile(lambda x: a + b * np.cos(k * np.pi * x), 40, eps)
    if s.cells.min() < 0.51:
        return
    res = pde_simulate(s, 0.2, 0.01)
    assert np.all(np.diff(res.series("energy")) <= 1e-12)


@settings(max_examples=15)
@given(st.floats(0.65, 0.85), st.floats(0.0, 0.14), st.integers(1, 5))
def test_values_stay_in_initial_range_at_bound(a, b, k):
    s = ContinuumState.from_profile(lambda x: a + b * np.cos(k * np.pi * x), 50, 1e-3)
    lo, hi = s.cells.min(), s.cells.max()
    res = pde_simulate(s, 0.05, 0.005, safety=0.5)
    for x in res.samples:
        assert lo - 1e-8 <= x.u_min and x.u_max <= hi + 1e-8


def test_weak_energy_values():
    assert weak_energy(ContinuumState.from_profile("constant 0.6", 8)) == pytest.approx(0.36)
    assert weak_energy(ContinuumState.from_profile("constant 0.5", 8)) == pytest.approx(0.25)


def test_weak_energy_self_convergence_on_ramp():
    a, b = 0.2, 0.9
    slope = b - a

    def integrand(x):
        u = a + slope * x
        return u * u + abs(u * u * (u - 0.5)) * slope**2

    exact = quad(integrand, 0, 1, points=[(0.5 - a) / slope])[0]
    errs = [abs(weak_energy(ContinuumState.from_profile(f"ramp {a} {b}", m)) - exact) for m in (25, 50, 100)]
    orders = [math.log2(e1 / e2) for e1, e2 in zip(errs, errs[1:])]
    assert min(orders) >= 1.0


def test_top_mode_amplitude():
    m = 16
    x = (np.arange(m) + 0.5) / m
    u = 0.5 + 0.01 * np.cos((m - 1) * np.pi * x)
    assert top_mode_amplitude(u) == pytest.approx(0.01, rel=1e-12)
    assert top_mode_amplitude(np.full(m, 0.5)) < 1e-16


def test_probe_constant_data():
    rep = illposedness_probe("constant 0.25", [0.05, 0.0], [20, 40])
    for e in rep.entries:
        assert e.growth_factor == 1.0 and e.mode_amplitude_final == 0.0 and not e.blew_up


def test_probe_growth_ordering_and_refinement():
    rep = illposedness_probe(ILL, [0.05, 0.0], [100, 200])
    assert rep.entry(0.0, 200).growth_factor >= 10 * rep.entry(0.05, 200).growth_factor
    assert rep.entry(0.0, 200).growth_factor > rep.entry(0.0, 100).growth_factor
    assert rep.entry(0.0, 200).mode_amplitude_final > rep.entry(0.0, 100).mode_amplitude_final
    assert not rep.entry(0.05, 200).backward and rep.entry(0.0, 200).backward
    assert rep.growth_increases_as_eps_decreases and rep.growth_increases_with_M
    assert rep.to_dict()["entries"][0]["M"] == 100


def test_probe_parallel_matches_serial():
    a = illposedness_probe(ILL, [0.05, 0.0], [20, 40])
    b = illposedness_probe(ILL, [0.05, 0.0], [20, 40], workers=2)
    assert a.entries == b.entries


def test_probe_preconditions():
    with pytest.raises(ValueError):
        illposedness_probe(WELL, [0.0], [20])
    with pytest.raises(ValueError):
        illposedness_probe(ILL, [0.0, 0.05], [20])
    with pytest.raises(ValueError):
        illposedness_probe(ILL, [0.0], [40, 20])


def test_weak_residual_constant_solution():
    res = pde_simulate(ContinuumState.from_profile("constant 0.7", 20), 1.0, 0.05, keep_states=True)
    assert abs(weak_form_residual(res.states)) < 1e-15


def test_bump_test_function_support():
    phi = BumpTestFunction(0.5, 0.25, 1.0, 0.5)
    pt, px = phi.evaluate(np.array([0.2, 0.5, 0.8]), 1.0)
    assert pt[0] == 0 and px[2] == 0 and pt[1] == 0  # centre in time has zero time derivative
    with pytest.raises(ValueError):
        BumpTestFunction(0.9, 0.2)


def _residuals(profile, eps, Ms, t_max):
    out = []
    phi = BumpTestFunction.spanning(0.0, t_max)
    for m in Ms:
        r = pde_simulate(ContinuumState.from_profile(profile, m, eps), t_max, t_max / m,
                         keep_states=True, blowup_cap=1e8)
        out.append(abs(weak_form_residual(r.states, phi)))
    return out


def test_weak_residual_decreases_for_well_posed_run():
    r = _residuals(WELL, 1e-3, (25, 50, 100), 0.5)
    assert r[0] > r[1] > r[2]


def test_weak_residual_grows_for_ill_posed_run():
    r = _residuals(ILL, 0.0, (100, 200), 0.05)
    assert r[1] >= r[0]


def test_lattice_and_continuum_share_limit():
    profile = "0.75+0.2*cos(pi*x)"
    lat = simulate(LatticeState(resolve(profile, 16)), 200_000, 1e-15)
    cont = pde_simulate(ContinuumState.from_profile(profile, 100, 1e-3), 12.0, 1.0)
    assert abs(lat.final.interior.mean() - cont.final.cells.mean()) <= 1e-4
    assert np.ptp(lat.final.interior) <= 1e-4 and np.ptp(cont.final.cells) <= 1e-4


def test_diagnostics_fields():
    s = ContinuumState.from_profile("ramp 0.5 1", 10)
    d = diagnostics(s)
    assert d.mass == pytest.approx(0.75)
    assert d.max_gradient == pytest.approx(0.5)
    assert d.row()[0] == 0.0 and len(d.row()) == 6
