import numpy as np
import pytest

from qbkinetic.collision import (
    CollisionError,
    c12_apply,
    c12_split,
    c22_apply,
    c22_split,
    entropy_test_function,
    operator_for,
    project_energy,
    q_apply,
    weak_form,
)
from qbkinetic.grid import DistributionState, bose_einstein, from_profile, make_grid
from qbkinetic.physics import PhysicalParams, energy

from conftest import gauss


def l1(grid, v):
    return float(np.sum(grid.volume_weights() * np.abs(v)))


def test_zero_state(grid, params):
    z = DistributionState(grid, np.zeros(grid.size))
    assert np.all(c12_apply(z, params) == 0)
    assert np.all(c22_apply(z, params) == 0)
    gain, loss = c12_split(z, params)
    assert np.all(gain == 0)
    # spontaneous decay survives in the loss frequency
    assert np.all(loss > 0)
    g22, l22 = c22_split(z, params)
    assert np.all(g22 == 0) and np.all(l22 == 0)
    r = q_apply(z, params)
    assert np.all(r.q == 0)


@pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
def test_equilibrium_detailed_balance(grid, grid2, params, c):
    res = []
    for g in (grid, grid2):
        be = bose_einstein(c, g, params)
        r = q_apply(be, params)
        assert l1(g, r.c12) <= 1e-6 * l1(g, r.gain)
        assert l1(g, r.c22) <= 1e-6 * l1(g, r.gain)
        res.append(l1(g, r.c12) / l1(g, r.gain))
    assert res[1] <= 0.5 * res[0]


def test_energy_conservation_random(grid, params, random_states):
    e = energy(grid.nodes, params)
    for s in random_states:
        for which, parts in (("c12", c12_split), ("c22", c22_split)):
            gain, loss = parts(s, params)
            scale = float(np.sum(grid.volume_weights() * e * (gain + s.values * loss)))
            assert abs(weak_form(s, e, which, params)) <= 1e-5 * scale


def test_c22_mass_neutral_random(grid, params, random_states):
    for s in random_states:
        gain, _ = c22_split(s, params)
        assert abs(weak_form(s, 1.0, "c22", params)) <= 1e-6 * l1(grid, gain)


def test_c12_mass_production_matches_weak_form(grid, params, random_states):
    s = random_states[0]
    assert weak_form(s, 1.0, "c12", params) == pytest.approx(float(np.sum(grid.volume_weights() * c12_apply(s, params))), rel=1e-14)


def test_dissipation_nonpositive(grid, params, random_states):
    for s in random_states:
        assert weak_form(s, entropy_test_function(s), "q", params) <= 0


def test_split_identities(grid, params, random_states):
    for s in random_states[:20]:
        for apply, split in ((c12_apply, c12_split), (c22_apply, c22_split)):
            gain, loss = split(s, params)
            assert np.all(gain >= 0) and np.all(loss >= 0)
            rate = apply(s, params)
            scale = np.max(np.abs(gain) + s.values * loss)
            assert np.max(np.abs(gain - s.values * loss - rate)) <= 1e-10 * scale


def test_split_positivity_sweep(grid, params):
    from qbkinetic.diagnostics import GaussianMixtureSampler

    for s in GaussianMixtureSampler(99).states(grid, 100):
        r = q_apply(s, params)
        assert np.all(r.gain >= 0) and np.all(r.q_minus >= 0)


def test_rates_invariants(grid, params, random_states):
    op = operator_for(grid, params)
    s = random_states[3]
    r = q_apply(s, params)
    np.testing.assert_array_equal(r.q, r.c12 + r.c22)
    _, l12 = op.c12_parts(s)
    _, l22 = op.c22_parts(s)
    np.testing.assert_array_equal(r.q_minus, l12 + l22)
    a, b = op.c12_subrates(s)
    np.testing.assert_allclose(a + b, r.c12, rtol=1e-12, atol=1e-14 * np.abs(r.c12).max())
    q1, q2 = op.c22_split_orders(s)
    np.testing.assert_allclose(q1 + q2, r.c22, rtol=1e-10, atol=1e-12 * np.abs(r.c22).max())


def test_c22_vanishes_below_cutoff():
    p = PhysicalParams(n_c=4.0)  # p0 = 8 > u_max
    g = make_grid(params=p)
    s = from_profile(g, gauss())
    assert np.all(c22_apply(s, p) == 0)


def test_conservation_projection(grid, params, random_states):
    s = random_states[5]
    r = q_apply(s, params, conservation_fix=True)
    e = energy(grid.nodes, params)
    raw = q_apply(s, params).q
    assert abs(np.sum(grid.volume_weights() * e * r.q)) <= 1e-14 * np.sum(grid.volume_weights() * e * np.abs(raw))
    np.testing.assert_allclose(project_energy(raw, s, params), r.q)


def test_weak_form_unknown_operator(grid, params, random_states):
    with pytest.raises(ValueError):
        weak_form(random_states[0], 1.0, "c13", params)


def test_nonfinite_is_reported(grid, params):
    op = operator_for(grid, params)
    with pytest.raises(CollisionError, match="node"):
        op._check(np.array([0.0, np.inf]), "C12 gain")


def test_operator_is_deterministic(grid, params, random_states):
    s = random_states[7]
    a = q_apply(s, params).q
    b = q_apply(s, params).q
    np.testing.assert_array_equal(a, b)
