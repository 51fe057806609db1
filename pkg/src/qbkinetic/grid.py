"""Radial grids, distribution states, moments, entropy and equilibria."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.special import logsumexp
from scipy.optimize import brentq

from .physics import DomainError, PhysicalParams, energy

FOUR_PI = 4.0 * math.pi


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Composite Gauss-Legendre rule for integrals over [0, u_max].

    ``edges`` are the panel boundaries; every panel carries the same number
    of nodes.  Integrals of radial functions in 3D pick up ``4 pi u^2``
    separately (see :meth:`volume_weights`).
    """

    nodes: np.ndarray
    weights: np.ndarray
    edges: np.ndarray
    u_max: float
    nodes_per_panel: int
    scheme: str = "composite-gauss-legendre"

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size == 0:
            raise DomainError("grid needs at least one node")
        if np.any(np.diff(nodes) <= 0) or nodes[0] <= 0 or nodes[-1] >= self.u_max:
            raise DomainError("nodes must be strictly increasing inside (0, u_max)")
        if np.any(np.asarray(self.weights) <= 0):
            raise DomainError("weights must be positive")

    @property
    def size(self) -> int:
        return self.nodes.size

    def volume_weights(self) -> np.ndarray:
        """Weights for integrals over R^3 of radial functions."""
        return FOUR_PI * self.nodes**2 * self.weights

    def panels(self):
        k = self.nodes_per_panel
        for i in range(len(self.edges) - 1):
            yield self.edges[i], self.edges[i + 1], slice(i * k, (i + 1) * k)

    def describe(self) -> dict:
        return {
            "scheme": self.scheme,
            "u_max": self.u_max,
            "edges": self.edges.tolist(),
            "nodes_per_panel": self.nodes_per_panel,
            "size": self.size,
        }


def gauss_panels(edges, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights with n points on each [edges[i], edges[i+1]]."""
    x, w = np.polynomial.legendre.leggauss(n)
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + b) * 0.5 + half * x[None, :]
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def panel_edges(u_max: float, panels: int, ratio: float = 1.6, snap=()) -> np.ndarray:
    """Panel boundaries growing geometrically away from u = 0.

    Panel widths grow by ``ratio`` from the origin outward.  Each value in
    ``snap`` lying strictly inside (0, u_max) replaces the nearest interior
    edge, so that kinks of the collision operators sit on panel boundaries.
    """
    if panels < 1:
        raise DomainError("need at least one panel")
    widths = ratio ** np.arange(panels, dtype=float)
    edges = np.concatenate([[0.0], np.cumsum(widths)])
    edges *= u_max / edges[-1]
    for s in snap:
        if 0.0 < s < u_max and panels > 1:
            interior = edges[1:-1]
            i = int(np.argmin(np.abs(interior - s)))
            interior[i] = s
            edges[1:-1] = np.sort(interior)
    if np.any(np.diff(edges) <= 0):
        raise DomainError("degenerate panel edges after snapping")
    return edges


def make_grid(
    u_max: float = 6.0,
    panels: int = 8,
    nodes_per_panel: int = 8,
    ratio: float = 1.0,
    refine: int = 1,
    params: PhysicalParams | None = None,
) -> RadialGrid:
    """Build the default composite grid.

    With ``params`` given, the crossover momentum p0 is made a panel
    boundary.  ``refine`` splits every panel into that many equal pieces.
    """
    snap = (params.p0,) if params is not None and params.p0 > 0 else ()
    edges = panel_edges(u_max, panels, ratio, snap)
    if refine > 1:
        edges = np.concatenate(
            [np.linspace(a, b, refine + 1)[:-1] for a, b in zip(edges[:-1], edges[1:])]
            + [[edges[-1]]]
        )
    nodes, weights = gauss_panels(edges, nodes_per_panel)
    return RadialGrid(nodes, weights, edges, float(u_max), nodes_per_panel)


@dataclass(frozen=True, eq=False)
class DistributionState:
    """Occupation numbers f_i >= 0 at the nodes of a grid."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.nodes.shape:
            raise DomainError("values do not match the grid")
        if not np.all(np.isfinite(v)):
            raise DomainError("distribution values must be finite")
        if np.any(v < 0):
            raise DomainError(f"distribution must be nonnegative (min {v.min():.3e})")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def with_values(self, values) -> "DistributionState":
        return DistributionState(self.grid, values)

    def scaled(self, alpha: float) -> "DistributionState":
        return DistributionState(self.grid, alpha * self.values)


def from_profile(grid: RadialGrid, profile) -> DistributionState:
    return DistributionState(grid, np.asarray(profile(grid.nodes), dtype=float))


def moment(state: DistributionState, k: float, params: PhysicalParams) -> float:
    """Energy moment  int E(p)^k f(p) dp  over R^3."""
    g = state.grid
    e = energy(g.nodes, params)
    return float(np.sum(g.volume_weights() * e**k * state.values))


def mass(state, params):
    return moment(state, 0.0, params)


def weighted_l1_norm(grid: RadialGrid, values, m: float, params: PhysicalParams | None = None, kind: str = "L") -> float:
    """Weighted L1 norms of a (signed) nodal function.

    kind="L":   int |p|^m |f| dp
    kind="E":   int |f| E^{m/2} dp
    kind="LL":  int |f| (1 + E^{m/2}) dp
    """
    a = np.abs(np.asarray(values, dtype=float))
    vw = grid.volume_weights()
    if kind == "L":
        return float(np.sum(vw * grid.nodes**m * a))
    if params is None:
        raise DomainError("energy-weighted norms need params")
    e = energy(grid.nodes, params)
    if kind == "E":
        return float(np.sum(vw * e ** (m / 2.0) * a))
    if kind == "LL":
        return float(np.sum(vw * (1.0 + e ** (m / 2.0)) * a))
    raise DomainError(f"unknown norm kind {kind!r}")


def entropy_density(f):
    """f ln f - (1 + f) ln(1 + f), with 0 ln 0 = 0."""
    f = np.asarray(f, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        flogf = np.where(f > 0, f * np.log(np.where(f > 0, f, 1.0)), 0.0)
    return flogf - (1.0 + f) * np.log1p(f)


def entropy(state: DistributionState) -> float:
    return float(np.sum(state.grid.volume_weights() * entropy_density(state.values)))


def bose_einstein_profile(c: float, params: PhysicalParams):
    if not c > 0:
        raise DomainError(f"inverse temperature c must be > 0, got {c}")

    def profile(u):
        x = c * energy(u, params)
        # exp(-x) / (1 - exp(-x)): no overflow for large x
        with np.errstate(divide="ignore"):
            return np.exp(-x) / -np.expm1(-x)

    return profile


def bose_einstein(c: float, grid: RadialGrid, params: PhysicalParams) -> DistributionState:
    """Equilibrium 1 / (exp(c E) - 1) sampled on the grid."""
    return from_profile(grid, bose_einstein_profile(c, params))


def fit_equilibrium_c(energy_target: float, grid: RadialGrid, params: PhysicalParams, rtol: float = 1e-10) -> float:
    """Inverse temperature whose equilibrium carries the given energy."""
    if not energy_target > 0:
        raise DomainError("energy target must be positive")
    e = energy(grid.nodes, params)
    vw = grid.volume_weights()

    pos = e > 0
    logw = np.log(vw[pos] * e[pos])
    ep = e[pos]

    def resid(logc):
        # log sum vw e / (exp(x) - 1), overflow-free
        x = math.exp(logc) * ep
        return float(logsumexp(logw - x - np.log(-np.expm1(-x)))) - math.log(energy_target)

    lo, hi = math.log(1e-6), math.log(1e6)
    flo, fhi = resid(lo), resid(hi)
    if not (flo > 0 > fhi):
        m_hi = math.exp(flo + math.log(energy_target))
        m_lo = math.exp(fhi + math.log(energy_target))
        raise DomainError(
            f"energy {energy_target:.6g} outside the attainable range [{m_lo:.3g}, {m_hi:.3g}]"
        )
    return math.exp(brentq(resid, lo, hi, xtol=1e-14, rtol=rtol * 1e-2))


def panel_basis(grid: RadialGrid, u) -> sparse.csr_matrix:
    """Lagrange basis of the panel nodes evaluated at momenta ``u``.

    Row ``k`` holds the weights that reproduce, at ``u[k]``, the degree
    ``nodes_per_panel - 1`` polynomial through the nodal values of the
    panel containing ``u[k]``.  Rows for ``u > u_max`` are empty.
    """
    u = np.asarray(u, dtype=float).ravel()
    k = grid.nodes_per_panel
    npan = len(grid.edges) - 1
    pan = np.clip(np.searchsorted(grid.edges, u, side="right") - 1, 0, npan - 1)
    live = u <= grid.u_max
    a = grid.edges[pan]
    b = grid.edges[pan + 1]
    t = (2.0 * u - a - b) / (b - a)
    x, _ = np.polynomial.legendre.leggauss(k)
    bw = np.array([1.0 / np.prod(x[j] - np.delete(x, j)) for j in range(k)])
    diff = t[:, None] - x[None, :]
    exact = diff == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = bw / diff
        vals = terms / terms.sum(axis=1, keepdims=True)
    hit = exact.any(axis=1)
    vals[hit] = exact[hit].astype(float)
    vals[~live] = 0.0
    cols = pan[:, None] * k + np.arange(k)[None, :]
    rows = np.repeat(np.arange(u.size), k)
    return sparse.csr_matrix((vals.ravel(), (rows, cols.ravel())), shape=(u.size, grid.size))


class Interpolant:
    """Off-node evaluation of a nodal distribution.

    Within each panel the product E * f is represented by the polynomial
    through that panel's nodes (spectrally accurate on smooth data),
    clamped at zero; f vanishes beyond ``u_max``.  E * f stays bounded near
    u = 0 for equilibria, whose f diverges like 1/E.
    """

    def __init__(self, state: DistributionState, params: PhysicalParams):
        self.grid = state.grid
        self.params = params
        self.y = energy(self.grid.nodes, params) * state.values

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        e = energy(u, self.params)
        y = np.maximum(panel_basis(self.grid, u) @ self.y, 0.0).reshape(u.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(e > 0, y / np.where(e > 0, e, 1.0), 0.0)


@dataclass(frozen=True)
class FeasibleSetSpec:
    """Caps of the invariant set: mass <= c0, energy == c1, m_{n*} <= c_nstar."""

    c0: float
    c1: float
    n_star: float = 7.0
    c_nstar: float = math.inf
    energy_rtol: float = 1e-6

    def __post_init__(self):
        for name in ("c0", "c1", "n_star", "c_nstar"):
            v = getattr(self, name)
            if not v > 0:
                raise DomainError(f"{name} must be positive")


@dataclass
class FeasibilityReport:
    positive: bool
    mass_ok: bool
    energy_ok: bool
    moment_ok: bool
    mass: float
    energy: float
    moment: float
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.positive and self.mass_ok and self.energy_ok and self.moment_ok

    def as_dict(self) -> dict:
        return {
            "S1_positive": self.positive,
            "S2_mass": self.mass_ok,
            "S3_energy": self.energy_ok,
            "S4_moment": self.moment_ok,
            "mass": self.mass,
            "energy": self.energy,
            "moment": self.moment,
            "ok": self.ok,
        }


def in_feasible_set(state: DistributionState, spec: FeasibleSetSpec, params: PhysicalParams) -> FeasibilityReport:
    m0 = mass(state, params)
    m1 = moment(state, 1.0, params)
    mn = moment(state, spec.n_star, params)
    return FeasibilityReport(
        positive=bool(np.all(state.values >= 0)),
        mass_ok=m0 <= spec.c0,
        energy_ok=abs(m1 - spec.c1) <= spec.energy_rtol * spec.c1,
        moment_ok=mn <= spec.c_nstar,
        mass=m0,
        energy=m1,
        moment=mn,
    )


def snapshot_dict(state: DistributionState, params_hash: str, time: float) -> dict:
    return {
        "nodes": state.grid.nodes.tolist(),
        "values": state.values.tolist(),
        "params_hash": params_hash,
        "time": time,
    }


def write_snapshot(path, state: DistributionState, params_hash: str, time: float) -> None:
    Path(path).write_text(json.dumps(snapshot_dict(state, params_hash, time)))


def read_snapshot(path, grid: RadialGrid) -> tuple[DistributionState, dict]:
    d = json.loads(Path(path).read_text())
    nodes = np.asarray(d["nodes"])
    if nodes.shape != grid.nodes.shape or not np.allclose(nodes, grid.nodes, rtol=1e-13, atol=0):
        raise DomainError("snapshot nodes do not match the grid")
    return DistributionState(grid, np.asarray(d["values"])), d
