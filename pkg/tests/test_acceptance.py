"""Acceptance criteria 1 to 12.

Each ``test_criterion_NN_*`` records its measured values with
``record_property("measured", ...)``; the conftest hook prints one PASS/FAIL
line per criterion at the end of the session.
"""

import math
from pathlib import Path

import numpy as np
import pytest

from qbkinetic.cli import main
from qbkinetic.collision import c22_split, q_apply, weak_form
from qbkinetic.diagnostics import (
    GaussianMixtureSampler,
    dissipation,
    h_theorem_audit,
    holder_probe,
    mass_growth_fit,
    moment_caps,
    one_sided_lipschitz_probe,
)
from qbkinetic.grid import bose_einstein, from_profile, make_grid
from qbkinetic.integrator import StepControls, evolve, richardson_order_check
from qbkinetic.manifolds import h0, q_half_closed_form, solve_q_gamma_s0
from qbkinetic.oracle import certify_collisions, certify_surfaces
from qbkinetic.physics import PhysicalParams
from qbkinetic.scenario import Scenario

from conftest import gauss

ROOT = Path(__file__).resolve().parents[1]
SHIPPED = sorted((ROOT / "scenarios").glob("*.ini"))


def l1(grid, v):
    return float(np.sum(grid.volume_weights() * np.abs(v)))


@pytest.fixture(scope="module")
def scenario_runs():
    out = {}
    for path in SHIPPED:
        scn = Scenario.from_file(path)
        grid = scn.grid()
        out[path.stem] = (scn, evolve(scn.initial_state(grid), scn.controls(), scn.params(), feasible=scn.feasible()))
    return out


def test_criterion_01_equilibrium_fixed_point(grid, grid2, params, record_property):
    res = []
    for g in (grid, grid2):
        r = q_apply(bose_einstein(1.0, g, params), params)
        res.append(l1(g, r.q) / l1(g, r.gain))
    record_property("measured", f"residual {res[0]:.2e} -> {res[1]:.2e} (ratio {res[0] / res[1]:.1f})")
    assert res[0] <= 1e-3
    assert res[1] <= 0.5 * res[0]


def test_criterion_02_energy_conservation(grid, params, record_property):
    s0 = from_profile(grid, gauss())
    drift = []
    for fix in (False, True):
        tr = evolve(s0, StepControls(h_max=0.05, t_end=1.0, record_every=0.05, conservation_fix=fix), params, keep_states=False)
        e = tr.energy
        drift.append(float(np.max(np.abs(e - e[0])) / e[0]))
    record_property("measured", f"drift off {drift[0]:.2e}, on {drift[1]:.2e}")
    assert drift[0] <= 1e-4
    assert drift[1] <= 1e-12


def test_criterion_03_c22_mass_neutrality(grid, params, random_states, record_property):
    # normaliser: m_0 times the mass-averaged rate scale = L1 norm of the gain
    worst = 0.0
    for s in random_states:
        gain, _ = c22_split(s, params)
        worst = max(worst, abs(weak_form(s, 1.0, "c22", params)) / l1(grid, gain))
    record_property("measured", f"max {worst:.2e} over {len(random_states)} states")
    assert len(random_states) == 50
    assert worst <= 1e-6


def test_criterion_04_h_theorem(scenario_runs, params, random_states, record_property):
    for name, (scn, tr) in scenario_runs.items():
        rep = h_theorem_audit(tr, scn.config["audits"]["tol_entropy"])
        assert rep["monotone"], (name, rep["violations"])
    d = max(dissipation(s, params) for s in random_states)
    record_property("measured", f"{len(scenario_runs)} scenarios monotone; max dissipation {d:.2e}")
    assert d <= 0


def test_criterion_05_mass_bound(scenario_runs, record_property):
    notes = []
    for name, (scn, tr) in scenario_runs.items():
        m = tr.mass
        if scn.config["params"]["n_c"] > 0:
            fit = mass_growth_fit(tr)
            bound = (m[0] + 1) * np.exp(fit["C_hat"] * tr.times) - 1
            assert fit["certified"] and np.all(m <= bound * (1 + 1e-12)), name
            notes.append(f"{name} C={fit['C_hat']:.3g}")
        else:
            rel = float(np.max(np.abs(m - m[0])) / m[0])
            notes.append(f"{name} dm/m={rel:.1e}")
            assert rel <= 1e-10, name
    record_property("measured", "; ".join(notes))


def test_criterion_06_manifold_geometry(unit_params, record_property):
    worst = 0.0
    for p in (0.1, 1.0, 2.0, 10.0):
        q = solve_q_gamma_s0(p, 0.5, unit_params)
        half = q_half_closed_form(p, unit_params)
        worst = max(worst, abs(q - half) / half)
    pp = np.geomspace(0.01, 100.0, 100)[:, None]
    gg = np.linspace(0.0, 1.0, 102)[1:-1][None, :]
    hmax = float(np.max(h0(pp, gg, 0.0, unit_params)))
    record_property("measured", f"q_1/2 rel err {worst:.1e}; max H0(gamma p) {hmax:.2e}")
    assert worst <= 1e-10
    assert hmax < 0


def test_criterion_07_oracle_certification(params, record_property):
    g32 = make_grid(6.0, 4, 8, 1.0, 1, params)
    assert g32.size == 32
    col = certify_collisions(g32, params)
    surf = certify_surfaces(params)
    err = col["max_rel_error"]
    record_property("measured", f"c12 {err['c12']:.2%}, c22 {err['c22']:.2%}, surfaces {surf['max_rel_error']:.2%}")
    assert col["passed"] and max(err.values()) <= 0.02
    assert surf["passed"] and surf["max_rel_error"] <= 0.01


def test_criterion_08_positivity(scenario_runs, record_property):
    worst = 0.0
    for name, (_, tr) in scenario_runs.items():
        fmax = max(float(np.max(s.values)) for s in tr.states)
        assert tr.min_f_all >= 0, name
        assert tr.clamp_total <= 1e-12 * fmax, name
        worst = max(worst, tr.clamp_total / fmax)
    record_property("measured", f"min f >= 0 everywhere; clamp/|f|_inf {worst:.1e}")


def test_criterion_09_moment_bounds(scenario_runs, grid, params, record_property):
    runs = {k: tr for k, (_, tr) in scenario_runs.items()}
    # compactly supported initial data
    shell = from_profile(grid, lambda u: np.where((u >= 1.0) & (u <= 2.5), 0.4, 0.0))
    runs["shell"] = evolve(shell, StepControls(h_max=0.05, t_end=1.0, record_every=0.05), params, keep_states=False)
    worst = 0.0
    for name, tr in runs.items():
        for col in ("m_3", "m_nstar"):
            rep = moment_caps(tr, col)
            worst = max(worst, rep["max_ratio"])
            assert rep["within"], (name, col)
    record_property("measured", f"max moment/cap {worst:.3f} (limit 10)")


def test_criterion_10_probe_boundedness(grid, grid2, params, record_property):
    maxima = []
    for g in (grid, grid2):
        pairs = GaussianMixtureSampler(2024, g.u_max).state_pairs(g, 100)
        row = {}
        for which in ("c12", "c22_1", "c22_2"):
            r = holder_probe(pairs, 2.0, which, params)
            assert r["finite"]
            row[which] = r["max_ratio"]
        r = one_sided_lipschitz_probe(pairs, 2.0, params)
        assert r["finite"]
        row["osl"] = r["max_constant"]
        maxima.append(row)
    change = {k: abs(maxima[1][k] - maxima[0][k]) / abs(maxima[0][k]) for k in maxima[0]}
    record_property("measured", "change " + ", ".join(f"{k} {v:.2%}" for k, v in change.items()))
    assert all(math.isfinite(v) for row in maxima for v in row.values())
    assert max(change.values()) < 0.10


def test_criterion_11_temporal_order(grid, params, record_property):
    rep = richardson_order_check(from_profile(grid, gauss()), params)
    record_property("measured", f"order {rep.order:.3f}")
    assert 0.8 <= rep.order <= 1.2


def test_criterion_12_determinism(tmp_path, record_property):
    cfg = ROOT / "scenarios" / "c12_only.ini"
    blobs = []
    for k in range(2):
        out = tmp_path / "run"
        assert main(["run", "--config", str(cfg), "--out", str(out), "--seed", "3"]) == 0
        blobs.append((out / "diagnostics.csv").read_bytes())
        out.rename(tmp_path / f"r{k}")
    record_property("measured", f"{len(blobs[0])} bytes, identical={blobs[0] == blobs[1]}")
    assert blobs[0] == blobs[1]
