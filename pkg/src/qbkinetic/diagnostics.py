"""Audits of trajectories and numerical probes of operator regularity.

Every audit is a pure function of its inputs and returns a plain dict that
serialises to JSON.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .collision import operator_for
from .grid import DistributionState, RadialGrid, bose_einstein, fit_equilibrium_c, from_profile, weighted_l1_norm
from .integrator import TrajectoryRecord
from .physics import PhysicalParams, energy


def _finite(x):
    return float(x) if math.isfinite(x) else None


def conservation_audit(traj: TrajectoryRecord) -> dict:
    """Energy drift, mass production and per-record conservation residuals."""
    t = traj.times
    e = traj.energy
    m = traj.mass
    e0 = e[0] if e[0] != 0 else 1.0
    drift = np.abs(e - e[0]) / abs(e0)
    dt = np.diff(t)
    prod = np.diff(m) / np.where(dt > 0, dt, 1.0)
    return {
        "max_rel_energy_drift": float(drift.max()),
        "energy_drift": drift.tolist(),
        "mass_production": prod.tolist(),
        "energy_residual": traj.column("energy_residual").tolist(),
        "c22_mass_residual": traj.column("c22_mass_residual").tolist(),
        "max_abs_c22_mass_residual": float(np.max(np.abs(traj.column("c22_mass_residual")))),
        # odd integrand: radial states carry no momentum
        "momentum": 0.0,
    }


def default_entropy_tolerance(traj: TrajectoryRecord) -> float:
    """Ten times the run's relative energy drift, in entropy units."""
    e = traj.energy
    s = traj.entropy
    drift = float(np.max(np.abs(e - e[0]))) / max(abs(e[0]), 1e-300)
    scale = float(np.max(np.abs(s))) if s.size else 0.0
    return 10.0 * drift * scale + 1e-12 * max(scale, 1e-300)


def h_theorem_audit(traj: TrajectoryRecord, tol_entropy: float | None = None) -> dict:
    """Flag entropy increases larger than ``tol_entropy`` between records."""
    tol = default_entropy_tolerance(traj) if tol_entropy is None else float(tol_entropy)
    s = traj.entropy
    inc = np.diff(s)
    bad = np.flatnonzero(inc > tol)
    diss = traj.column("dissipation")
    return {
        "tol_entropy": tol,
        "monotone": bool(bad.size == 0),
        "violations": [{"index": int(i + 1), "increase": float(inc[i])} for i in bad],
        "max_increase": float(inc.max()) if inc.size else 0.0,
        "dissipation": diss.tolist(),
        "max_dissipation": float(diss.max()),
    }


def relaxation_audit(traj: TrajectoryRecord, params: PhysicalParams) -> dict:
    """L1 distance of each recorded state to the equilibrium of equal energy."""
    if not traj.states:
        raise ValueError("relaxation audit needs recorded states")
    grid = traj.states[0].grid
    vw = grid.volume_weights()
    cs, dist = [], []
    for st, e in zip(traj.states, traj.energy):
        c = fit_equilibrium_c(e, grid, params)
        eq = bose_einstein(c, grid, params)
        cs.append(c)
        dist.append(float(np.sum(vw * np.abs(st.values - eq.values))))
    return {
        "c": cs,
        "c_spread": float(max(cs) - min(cs)),
        "distance": dist,
        "decreased": bool(dist[-1] < dist[0]) if len(dist) > 1 else True,
    }


def mass_growth_fit(traj: TrajectoryRecord) -> dict:
    """Smallest C with d m0/dt <= C (1 + m0) between records, and the check
    m0(t) <= (m0(0) + 1) exp(C t) - 1 at every record."""
    t = traj.times
    m = traj.mass
    if t.size < 3:
        raise ValueError("mass_growth_fit needs at least 3 records")
    dt = np.diff(t)
    rate = np.diff(m) / dt / (1.0 + m[:-1])
    c_hat = max(float(rate.max()), 0.0)
    bound = (m[0] + 1.0) * np.exp(c_hat * t) - 1.0
    slack = bound - m
    tol = 1e-12 * max(1.0, float(np.max(np.abs(m))))
    # least-squares residual of log(1 + m0) against the fitted exponent
    resid = float(np.sqrt(np.mean((np.log1p(m) - np.log1p(m[0]) - c_hat * t) ** 2)))
    return {
        "C_hat": c_hat,
        "residual": resid,
        "bound": bound.tolist(),
        "certified": bool(np.all(slack >= -tol)),
        "min_slack": float(slack.min()),
        "rel_mass_change": float(np.max(np.abs(m - m[0])) / max(abs(m[0]), 1e-300)),
    }


def moment_caps(traj: TrajectoryRecord, name: str, factor: float = 10.0) -> dict:
    """Gronwall cap for a recorded moment column.

    Fits A = max over record intervals of (d m/dt)_+ / (1 + m) and compares
    the trajectory with ``factor`` times (1 + m(0)) exp(A t) - 1.
    """
    t = traj.times
    m = traj.column(name)
    dt = np.diff(t)
    a = float(np.max(np.maximum(np.diff(m) / dt, 0.0) / (1.0 + m[:-1]))) if dt.size else 0.0
    cap = (1.0 + m[0]) * np.exp(a * t) - 1.0
    return {
        "moment": name,
        "A": a,
        "cap": cap.tolist(),
        "max_ratio": float(np.max(m / np.maximum(cap, 1e-300))),
        "within": bool(np.all(m <= factor * cap)),
    }


# -- random states and probes ------------------------------------------------


@dataclass(frozen=True)
class MixtureProfile:
    """Sum of Gaussian bumps a_k exp(-((u - c_k)/w_k)^2)."""

    amplitudes: tuple
    centers: tuple
    widths: tuple

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        for a, c, w in zip(self.amplitudes, self.centers, self.widths):
            out = out + a * np.exp(-(((u - c) / w) ** 2))
        return out

    def plus(self, other: "MixtureProfile") -> "MixtureProfile":
        return MixtureProfile(
            self.amplitudes + other.amplitudes, self.centers + other.centers, self.widths + other.widths
        )


class GaussianMixtureSampler:
    """Seeded log-uniform Gaussian-mixture profiles and profile pairs.

    Profiles are grid-independent, so the same seed yields the same
    functions on every grid (needed for refinement comparisons).
    """

    def __init__(self, seed: int = 0, u_max: float = 6.0, max_components: int = 3):
        self.seed = int(seed)
        self.u_max = float(u_max)
        self.max_components = max_components

    def _mixture(self, rng, amp_range=(1e-2, 1.0)):
        k = int(rng.integers(1, self.max_components + 1))
        amps = np.exp(rng.uniform(np.log(amp_range[0]), np.log(amp_range[1]), k))
        centers = rng.uniform(0.0, 0.6 * self.u_max, k)
        widths = np.exp(rng.uniform(np.log(0.5), np.log(1.5), k))
        return MixtureProfile(tuple(amps), tuple(centers), tuple(widths))

    def profile(self, index: int) -> MixtureProfile:
        rng = np.random.default_rng([self.seed, index, 0])
        return self._mixture(rng)

    def pair(self, index: int):
        """(f, g); half are independent draws, half small perturbations."""
        rng = np.random.default_rng([self.seed, index, 1])
        f = self._mixture(rng)
        if rng.random() < 0.5:
            g = self._mixture(rng)
        else:
            g = f.plus(self._mixture(rng, amp_range=(1e-3, 1e-1)))
        return f, g

    def states(self, grid: RadialGrid, n: int):
        return [from_profile(grid, self.profile(i)) for i in range(n)]

    def state_pairs(self, grid: RadialGrid, n: int):
        out = []
        for i in range(n):
            f, g = self.pair(i)
            out.append((from_profile(grid, f), from_profile(grid, g)))
        return out


HOLDER_EXTRA = {"c12": 3, "c22_1": 1, "c22_2": 0}


def _operator_values(state, which, params):
    op = operator_for(state.grid, params)
    if which == "c12":
        return op.c12(state)
    if which == "c22_1":
        return op.c22_split_orders(state)[0]
    if which == "c22_2":
        return op.c22_split_orders(state)[1]
    if which == "q":
        return op.rates(state).q
    raise ValueError(f"unknown operator {which!r}")


def holder_probe(pairs, n: float, which: str, params: PhysicalParams) -> dict:
    """max ||C[f] - C[g]||_{L1_n} / (||f - g||_{L1_{n+k}} + ||f - g||_{L1})
    with k = 3, 1, 0 for C12, C22^1, C22^2."""
    k = HOLDER_EXTRA[which]
    ratios = []
    for f, g in pairs:
        d = f.values - g.values
        den = weighted_l1_norm(f.grid, d, n + k) + weighted_l1_norm(f.grid, d, 0)
        if den <= 0:
            continue
        num = weighted_l1_norm(f.grid, _operator_values(f, which, params) - _operator_values(g, which, params), n)
        ratios.append(num / den)
    arr = np.array(ratios)
    return {
        "operator": which,
        "n": n,
        "samples": int(arr.size),
        "max_ratio": float(arr.max()) if arr.size else 0.0,
        "finite": bool(np.all(np.isfinite(arr))),
        "ratios": arr.tolist(),
    }


def one_sided_lipschitz_probe(pairs, n: float, params: PhysicalParams) -> dict:
    """max M0 / ||f - g||_{LL1_{2n}} with
    M0 = int (Q[f] - Q[g]) sign(f - g) (1 + E^n) dp and sign(0) = 0."""
    consts = []
    for f, g in pairs:
        d = f.values - g.values
        den = weighted_l1_norm(f.grid, d, 2 * n, params, kind="LL")
        if den <= 0:
            continue
        vw = f.grid.volume_weights()
        w = 1.0 + energy(f.grid.nodes, params) ** n
        dq = _operator_values(f, "q", params) - _operator_values(g, "q", params)
        consts.append(float(np.sum(vw * dq * np.sign(d) * w)) / den)
    arr = np.array(consts)
    return {
        "n": n,
        "samples": int(arr.size),
        "max_constant": float(arr.max()) if arr.size else 0.0,
        "finite": bool(np.all(np.isfinite(arr))),
        "constants": arr.tolist(),
    }


def dissipation(state: DistributionState, params: PhysicalParams) -> float:
    """int Q[f] ln(f / (1 + f)) dp, nonpositive by the H-theorem."""
    f = state.values
    rates = operator_for(state.grid, params).rates(state)
    with np.errstate(divide="ignore"):
        phi = np.where(f > 0, np.log(np.where(f > 0, f, 1.0)) - np.log1p(f), 0.0)
    return float(np.sum(state.grid.volume_weights() * rates.q * phi))


def full_audit(traj: TrajectoryRecord, params: PhysicalParams, relaxation: bool = True) -> dict:
    out = {
        "conservation": conservation_audit(traj),
        "h_theorem": h_theorem_audit(traj),
        "mass_growth": mass_growth_fit(traj) if len(traj) >= 3 else None,
        "moments": {k: moment_caps(traj, k) for k in ("m_3", "m_nstar")} if len(traj) >= 2 else None,
        "positivity": {"min_f": traj.min_f_all, "clamp_total": traj.clamp_total},
        "abort": traj.abort,
    }
    if relaxation and traj.states:
        try:
            out["relaxation"] = relaxation_audit(traj, params)
        except (ValueError, RuntimeError) as exc:
            out["relaxation"] = {"error": str(exc)}
    return out
