"""Positivity-preserving forward Euler for df/dt = Q[f].

With ``Q = gain - f * Q^-`` and ``gain >= 0`` the update
``f + h Q = f (1 - h Q^-) + h gain`` stays nonnegative for ``h < 1/max Q^-``;
the step is a fraction ``safety`` of that bound, capped by ``h_max``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .collision import CollisionRates, operator_for, project_energy
from .grid import DistributionState, FeasibleSetSpec, entropy, in_feasible_set, moment
from .physics import DomainError, PhysicalParams, energy


class StepUnderflow(RuntimeError):
    """The positivity-limited step collapsed below the floor."""

    def __init__(self, message, node=None, time=None):
        super().__init__(message)
        self.node = node
        self.time = time


@dataclass(frozen=True)
class StepControls:
    """Time-stepping configuration.

    ``record_every`` is a time interval; steps are shortened so that every
    multiple of it (and ``t_end``) is hit exactly.
    """

    h_max: float = 0.01
    safety: float = 0.5
    t_end: float = 1.0
    record_every: float = 0.05
    conservation_fix: bool = False
    h_min: float = 1e-12
    n_star: float = 7.0

    def __post_init__(self):
        if not (0.0 < self.safety < 1.0):
            raise DomainError(f"safety must lie in (0, 1), got {self.safety}")
        for name in ("h_max", "t_end", "record_every"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise DomainError(f"{name} must be positive and finite")


DIAGNOSTIC_COLUMNS = (
    "t", "mass", "energy", "entropy", "m_2", "m_3", "m_nstar",
    "h_used", "min_f", "clamp_total", "energy_residual", "c22_mass_residual", "dissipation",
)


@dataclass
class TrajectoryRecord:
    """Diagnostics at the recorded times plus the recorded states."""

    n_star: float
    rows: list = field(default_factory=list)
    states: list = field(default_factory=list)
    steps: int = 0
    clamp_total: float = 0.0
    min_f_all: float = math.inf
    abort: dict | None = None

    def column(self, name: str) -> np.ndarray:
        i = DIAGNOSTIC_COLUMNS.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    @property
    def times(self) -> np.ndarray:
        return self.column("t")

    @property
    def mass(self) -> np.ndarray:
        return self.column("mass")

    @property
    def energy(self) -> np.ndarray:
        return self.column("energy")

    @property
    def entropy(self) -> np.ndarray:
        return self.column("entropy")

    def moments(self, name: str) -> np.ndarray:
        return self.column(name)

    def __len__(self):
        return len(self.rows)


def positivity_step_bound(state: DistributionState, rates: CollisionRates) -> float:
    """1 / max Q^- (infinite when the loss frequency vanishes)."""
    qm = float(np.max(rates.q_minus)) if rates.q_minus.size else 0.0
    return math.inf if qm <= 0 else 1.0 / qm


def _rates(state, params, fix):
    op = operator_for(state.grid, params)
    r = op.rates(state)
    beta = 0.0
    if fix:
        q = project_energy(r.q, state, params)
        # q - q_fixed = beta * f
        idx = np.flatnonzero(state.values > 0)
        if idx.size:
            beta = float((r.q[idx[0]] - q[idx[0]]) / state.values[idx[0]])
        r = CollisionRates(c12=r.c12, c22=r.c22, q=q, q_minus=r.q_minus, gain=r.gain)
    return r, beta


def step(state: DistributionState, controls: StepControls, params: PhysicalParams, h_cap: float | None = None):
    """One Euler step.  Returns ``(new_state, h_used, clamped)``.

    ``clamped`` is the largest negative excursion removed by the clamp,
    which only occurs at round-off level.
    """
    rates, beta = _rates(state, params, controls.conservation_fix)
    return _advance(state, rates, beta, controls, h_cap)


def _advance(state, rates, beta, controls, h_cap=None, t=None):
    # the projection adds beta * f to the loss side
    hplus = positivity_step_bound(state, rates)
    if beta > 0:
        hplus = 1.0 / (1.0 / hplus + beta) if math.isfinite(hplus) else 1.0 / beta
    h = min(controls.h_max, controls.safety * hplus)
    if h_cap is not None:
        h = min(h, h_cap)
    # only the positivity limit counts as underflow, not a short record gap
    if controls.safety * hplus < controls.h_min:
        node = int(np.argmax(rates.q_minus))
        raise StepUnderflow(
            f"step {controls.safety * hplus:.3e} below floor; stiffest node {node} "
            f"(u={state.grid.nodes[node]:.6g}, Q-={rates.q_minus[node]:.3e})",
            node=node,
            time=t,
        )
    new = state.values + h * rates.q
    neg = float(-new.min()) if new.min() < 0 else 0.0
    np.maximum(new, 0.0, out=new)
    return DistributionState(state.grid, new), h, neg


def _row(t, state, params, n_star, h, min_f, clamp, rates):
    g = state.grid
    vw = g.volume_weights()
    e = energy(g.nodes, params)
    f = state.values
    with np.errstate(divide="ignore"):
        phi = np.where(f > 0, np.log(np.where(f > 0, f, 1.0)) - np.log1p(f), 0.0)
    return (
        float(t),
        moment(state, 0.0, params),
        moment(state, 1.0, params),
        entropy(state),
        moment(state, 2.0, params),
        moment(state, 3.0, params),
        moment(state, n_star, params),
        float(h),
        float(min_f),
        float(clamp),
        float(np.sum(vw * e * rates.q)),
        float(np.sum(vw * rates.c22)),
        float(np.sum(vw * phi * rates.q)),
    )


def evolve(
    state0: DistributionState,
    controls: StepControls,
    params: PhysicalParams,
    feasible: FeasibleSetSpec | None = None,
    keep_states: bool = True,
) -> TrajectoryRecord:
    """Integrate to ``controls.t_end`` recording diagnostics.

    A step underflow stops the run; the partial trajectory is returned with
    ``abort`` filled in.
    """
    if feasible is not None:
        rep = in_feasible_set(state0, feasible, params)
        if not rep.ok:
            raise DomainError(f"initial state outside the feasible set: {rep.as_dict()}")
    traj = TrajectoryRecord(n_star=controls.n_star)
    state = state0
    t = 0.0
    n_rec = int(math.ceil(controls.t_end / controls.record_every - 1e-9))
    targets = [min(k * controls.record_every, controls.t_end) for k in range(1, n_rec + 1)]
    rates, beta = _rates(state, params, controls.conservation_fix)
    h_last = 0.0
    min_f = float(state.values.min())
    traj.rows.append(_row(t, state, params, controls.n_star, h_last, min_f, 0.0, rates))
    if keep_states:
        traj.states.append(state)
    for target in targets:
        while t < target - 1e-14 * max(1.0, target):
            try:
                new, h, neg = _advance(state, rates, beta, controls, h_cap=target - t, t=t)
            except StepUnderflow as exc:
                traj.abort = {"reason": str(exc), "time": t, "node": exc.node}
                return traj
            traj.clamp_total += neg
            traj.steps += 1
            t = t + h
            if target - t < 1e-14 * max(1.0, target):
                t = target
            state = new
            h_last = h
            min_f = min(min_f, float(state.values.min()))
            rates, beta = _rates(state, params, controls.conservation_fix)
        traj.min_f_all = min(traj.min_f_all, min_f)
        traj.rows.append(_row(t, state, params, controls.n_star, h_last, min_f, traj.clamp_total, rates))
        if keep_states:
            traj.states.append(state)
        min_f = float(state.values.min())
    traj.min_f_all = min(traj.min_f_all, min_f)
    return traj


@dataclass(frozen=True)
class RichardsonReport:
    order: float
    steps: tuple
    differences: tuple
    note: str = ""

    def as_dict(self) -> dict:
        return {"order": self.order, "steps": list(self.steps), "differences": list(self.differences), "note": self.note}


def richardson_order_check(
    state0: DistributionState,
    params: PhysicalParams,
    h: float | None = None,
    n_steps: int = 8,
    safety: float = 0.5,
) -> RichardsonReport:
    """Observed temporal order from runs with steps h, h/2 and h/4.

    ``h`` defaults to a quarter of the positivity-limited step at ``t=0``, so
    that the fixed step is the binding constraint in all three runs.
    """
    if h is None:
        rates, _ = _rates(state0, params, False)
        hp = positivity_step_bound(state0, rates)
        h = 0.25 * safety * hp if math.isfinite(hp) else 0.01
    t_end = n_steps * h
    finals = []
    for div in (1, 2, 4):
        ctl = StepControls(h_max=h / div, safety=safety, t_end=t_end, record_every=t_end)
        tr = evolve(state0, ctl, params)
        if tr.abort is not None:
            raise StepUnderflow(tr.abort["reason"])
        finals.append(tr.states[-1].values)
    vw = state0.grid.volume_weights()
    d1 = float(np.sum(vw * np.abs(finals[0] - finals[1])))
    d2 = float(np.sum(vw * np.abs(finals[1] - finals[2])))
    scale = float(np.sum(vw * np.abs(finals[2])))
    if d2 <= 1e-13 * max(scale, 1e-300) or d1 <= 1e-13 * max(scale, 1e-300):
        return RichardsonReport(math.nan, (h, h / 2, h / 4), (d1, d2), "differences at round-off; order undefined")
    return RichardsonReport(math.log2(d1 / d2), (h, h / 2, h / 4), (d1, d2))
