import math

import numpy as np
import pytest

from qbkinetic.collision import q_apply
from qbkinetic.diagnostics import mass_growth_fit
from qbkinetic.grid import DistributionState, FeasibleSetSpec, bose_einstein, from_profile, mass, moment
from qbkinetic.integrator import (
    DIAGNOSTIC_COLUMNS,
    StepControls,
    evolve,
    positivity_step_bound,
    richardson_order_check,
    step,
)
from qbkinetic.physics import DomainError, PhysicalParams, energy

from conftest import gauss


@pytest.fixture(scope="module")
def gaussian_run(grid, params):
    s0 = from_profile(grid, gauss())
    return evolve(s0, StepControls(h_max=0.05, t_end=1.0, record_every=0.05), params)


@pytest.mark.parametrize("kw", [{"safety": 1.0}, {"safety": 0.0}, {"h_max": 0.0}, {"t_end": -1.0}, {"record_every": math.inf}])
def test_controls_validation(kw):
    with pytest.raises(DomainError):
        StepControls(**kw)


def test_step_bound_infinite_without_loss(grid):
    p = PhysicalParams(n_c=0.0, kappa3=0.05)
    z = DistributionState(grid, np.zeros(grid.size))
    r = q_apply(z, p)
    assert positivity_step_bound(z, r) == math.inf
    new, h, neg = step(z, StepControls(h_max=0.02), p)
    assert h == 0.02 and neg == 0.0
    np.testing.assert_array_equal(new.values, z.values)


def test_step_bound_keeps_positivity(grid, params, random_states):
    for s in random_states:
        r = q_apply(s, params)
        h = 0.5 * positivity_step_bound(s, r)
        assert np.all(s.values + h * r.q >= 0)


def test_equilibrium_step(grid, params):
    be = bose_einstein(1.0, grid, params)
    new, h, neg = step(be, StepControls(h_max=1.0), params)
    assert neg == 0.0
    r = q_apply(be, params)
    assert h <= 0.5 * positivity_step_bound(be, r) * (1 + 1e-15)
    vw = grid.volume_weights()
    assert np.sum(vw * np.abs(new.values - be.values)) <= h * 1e-9 * np.sum(vw * r.gain)


def test_single_step_energy_change(grid, params):
    s = from_profile(grid, gauss())
    new, h, _ = step(s, StepControls(h_max=0.05), params)
    e0, e1 = moment(s, 1.0, params), moment(new, 1.0, params)
    assert abs(e1 - e0) <= 1e-6 * h * e0


def test_equilibrium_evolve_constant(grid, params):
    be = bose_einstein(1.0, grid, params)
    tr = evolve(be, StepControls(h_max=0.1, t_end=1.0, record_every=0.25), params)
    assert len(tr) == 5 and tr.abort is None
    for col in ("mass", "energy", "entropy", "m_3"):
        v = tr.column(col)
        assert np.max(np.abs(v - v[0])) <= 1e-10 * abs(v[0])


def test_record_times_exact(gaussian_run):
    t = gaussian_run.times
    np.testing.assert_allclose(t, np.arange(21) * 0.05, rtol=0, atol=1e-15)
    assert np.all(np.diff(t) > 0)
    assert len(gaussian_run.rows[0]) == len(DIAGNOSTIC_COLUMNS)
    assert len(gaussian_run.states) == len(gaussian_run)


def test_gaussian_entropy_nonincreasing(gaussian_run):
    assert np.all(np.diff(gaussian_run.entropy) <= 0)
    assert np.all(gaussian_run.column("dissipation") <= 0)


def test_gaussian_mass_bound(gaussian_run):
    fit = mass_growth_fit(gaussian_run)
    assert fit["certified"] and np.isfinite(fit["C_hat"])
    m, t, c = gaussian_run.mass, gaussian_run.times, fit["C_hat"]
    # discrete Gronwall form
    assert np.all(m[1:] <= m[:-1] + np.diff(t) * c * (1 + m[:-1]) * (1 + 1e-12))


def test_gaussian_positivity(gaussian_run):
    assert gaussian_run.min_f_all >= 0
    assert gaussian_run.clamp_total <= 1e-12 * max(np.max(s.values) for s in gaussian_run.states)


def test_energy_drift_fix(grid, params, gaussian_run):
    e = gaussian_run.energy
    assert np.max(np.abs(e - e[0])) / e[0] <= 1e-4
    s0 = gaussian_run.states[0]
    tr = evolve(s0, StepControls(h_max=0.05, t_end=1.0, record_every=0.25, conservation_fix=True), params)
    e = tr.energy
    assert np.max(np.abs(e - e[0])) / e[0] <= 1e-12


def test_energy_drift_first_order_in_h(grid, params):
    # Euler's energy change per step is exactly h * sum(vw E q), so the drift
    # converges to the time integral of the quadrature residual at order 1
    s0 = from_profile(grid, gauss())
    d = []
    for h in (0.05, 0.025, 0.0125):
        tr = evolve(s0, StepControls(h_max=h, t_end=0.5, record_every=0.5), params, keep_states=False)
        d.append(tr.energy[-1] - tr.energy[0])
    ratio = (d[0] - d[1]) / (d[1] - d[2])
    assert 1.6 <= ratio <= 2.4


def test_feasible_enforcement(grid, params):
    s0 = from_profile(grid, gauss())
    spec = FeasibleSetSpec(c0=0.1 * mass(s0, params), c1=moment(s0, 1.0, params))
    with pytest.raises(DomainError, match="feasible"):
        evolve(s0, StepControls(t_end=0.1), params, feasible=spec)


def test_underflow_aborts_with_partial_trajectory(grid, params):
    s0 = from_profile(grid, gauss())
    tr = evolve(s0, StepControls(h_max=0.05, t_end=1.0, h_min=10.0), params)
    assert tr.abort is not None and "stiffest node" in tr.abort["reason"]
    assert len(tr) == 1


def test_richardson_order(grid, params):
    rep = richardson_order_check(from_profile(grid, gauss()), params)
    assert 0.8 <= rep.order <= 1.2


def test_richardson_equilibrium_undefined(grid, params):
    p = PhysicalParams(n_c=0.0, kappa3=0.05)
    z = DistributionState(grid, np.zeros(grid.size))
    rep = richardson_order_check(z, p, h=0.01)
    assert math.isnan(rep.order) and "round-off" in rep.note
