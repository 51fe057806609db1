"""C12 and C22 collision operators on a radial grid.

Both operators are evaluated as one-dimensional (C12) or two-dimensional
(C22) quadratures whose energy deltas are resolved analytically.  All
quadrature points, partner momenta and kernel weights depend only on the
grid and the parameters, so they are built once per (grid, params) pair by
:class:`CollisionOperator`; each evaluation then only samples the
interpolated distribution at the stored energies.

Every collision partner is kept inside the computational ball
``|p| <= u_max``.  The truncated operators keep the continuum symmetries,
so they conserve energy (and C22 mass) and vanish on Bose-Einstein states.

Integration intervals are cut at every point where a sampled momentum
crosses a grid node, which keeps the piecewise-cubic interpolant smooth on
each Gauss-Legendre sub-interval.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import manifolds
from .grid import DistributionState, RadialGrid, panel_basis
from .physics import PhysicalParams, energy, energy_derivative, inverse_energy, k12, k22


class CollisionError(FloatingPointError):
    """A non-finite value appeared while evaluating a collision integral."""


@dataclass(frozen=True)
class CollisionRates:
    """Per-node rates.  ``q == c12 + c22`` and ``q_minus >= 0``."""

    c12: np.ndarray
    c22: np.ndarray
    q: np.ndarray
    q_minus: np.ndarray
    gain: np.ndarray


class Sampler:
    """Evaluate the panel interpolant of f at fixed momenta.

    The interpolation rows are assembled once; an evaluation is a sparse
    product with the nodal values of E * f.
    """

    def __init__(self, grid: RadialGrid, params: PhysicalParams, momenta: np.ndarray):
        u = np.asarray(momenta, dtype=float).ravel()
        self.basis = panel_basis(grid, u)
        e = energy(u, params)
        self.inv_e = np.where(e > 0, 1.0 / np.where(e > 0, e, 1.0), 0.0)

    def __call__(self, y: np.ndarray) -> np.ndarray:
        out = self.basis @ y
        np.maximum(out, 0.0, out=out)
        return out * self.inv_e


def _gl_segments(breaks: np.ndarray, m: int):
    """Gauss-Legendre points/weights on consecutive [breaks[j], breaks[j+1]]."""
    x, w = np.polynomial.legendre.leggauss(m)
    a, b = breaks[:-1, None], breaks[1:, None]
    half = 0.5 * (b - a)
    return ((a + b) * 0.5 + half * x).ravel(), (half * w).ravel()


def _breaks(lo: float, hi: float, *candidates) -> np.ndarray:
    pts = np.concatenate([np.atleast_1d(np.asarray(c, dtype=float)) for c in candidates] + [[lo, hi]])
    pts = pts[(pts >= lo) & (pts <= hi)]
    pts = np.unique(pts)
    span = hi - lo
    keep = np.concatenate([[True], np.diff(pts) > 1e-13 * max(span, 1.0)])
    pts = pts[keep]
    pts[-1] = hi
    return pts


class CollisionOperator:
    """Precomputed quadrature for C12 and C22 on one grid.

    Parameters
    ----------
    grid, params
        Discretisation and physical constants.
    order : int
        Gauss-Legendre points per sub-interval in the C12 integrals and in
        the inner C22 integral.
    outer_order : int
        Gauss-Legendre points per sub-interval in the outer C22 integral.
    """

    def __init__(self, grid: RadialGrid, params: PhysicalParams, order: int = 8, outer_order: int = 8):
        self.grid = grid
        self.params = params
        self.order = order
        self.outer_order = outer_order
        self.e_nodes = energy(grid.nodes, params)
        self._build_c12()
        self._build_c22()

    # -- construction -----------------------------------------------------

    def _build_c12(self):
        prm, g = self.params, self.grid
        edges = g.edges
        e_edges = energy(edges, prm)
        pref = prm.c12_prefactor
        owner0, u0, r0, w0 = [], [], [], []
        owner1, u1, s1, w1 = [], [], [], []
        for i, p in enumerate(g.nodes):
            ep = self.e_nodes[i]
            # S^0: u in (0, p), partner r with E(r) = E(p) - E(u)
            cross = inverse_energy(np.maximum(ep - e_edges[e_edges < ep], 0.0), prm)
            br = _breaks(0.0, p, edges, cross)
            u, w = _gl_segments(br, self.order)
            r = manifolds.s0_partner(p, u, prm)
            owner0.append(np.full(u.size, i))
            u0.append(u)
            r0.append(r)
            w0.append(pref * w * manifolds.s0_weight(p, u, prm) * k12(p, r, u, prm))
            # S^1: partner s with E(s) = E(p) + E(u), both kept inside u_max
            ecross = e_edges[e_edges > ep] - ep
            cross = inverse_energy(ecross, prm)
            br = _breaks(0.0, float(inverse_energy(e_edges[-1] - ep, prm)), edges, cross)
            u, w = _gl_segments(br, self.order)
            s = manifolds.s1_partner(p, u, prm)
            owner1.append(np.full(u.size, i))
            u1.append(u)
            s1.append(s)
            w1.append(2.0 * pref * w * manifolds.s1_weight(p, u, prm) * k12(s, p, u, prm))
        self._c12_owner0 = np.concatenate(owner0)
        self._c12_w0 = np.concatenate(w0)
        self._c12_u0 = Sampler(g, prm, np.concatenate(u0))
        self._c12_r0 = Sampler(g, prm, np.concatenate(r0))
        self._c12_owner1 = np.concatenate(owner1)
        self._c12_w1 = np.concatenate(w1)
        self._c12_u1 = Sampler(g, prm, np.concatenate(u1))
        self._c12_s1 = Sampler(g, prm, np.concatenate(s1))

    def _build_c22(self):
        prm, g = self.params, self.grid
        edges = g.edges
        e_edges = energy(edges, prm)
        p0 = prm.p0
        e0 = float(energy(p0, prm))
        self._c22_active = prm.kappa3 > 0 and bool(np.any(g.nodes >= p0))
        if not self._c22_active:
            return
        owner, w_all, p2_all, p3_all, p4_all = [], [], [], [], []
        for i, p1 in enumerate(g.nodes):
            if p1 < p0:
                continue
            e1 = self.e_nodes[i]
            # p4 <= u_max starts to bind once E2 > E(u_max) + E(p0) - E1
            e_bind = e_edges[-1] + e0 - e1
            bind = [float(inverse_energy(e_bind, prm))] if e_bind > 0 else []
            p2, w2 = _gl_segments(_breaks(p0, g.u_max, edges, [p1], bind), self.outer_order)
            for pb, wb in zip(p2, w2):
                etot = e1 + float(energy(pb, prm))
                # p4 >= p0 caps E3 at E1 + E2 - E(p0)
                if float(inverse_energy(etot - e0, prm)) <= p0:
                    continue
                p3max = float(inverse_energy(etot - e0, prm))
                hi = min(p3max, g.u_max)
                e4c = etot - e_edges
                cross = inverse_energy(e4c[(e4c >= e0) & (e4c <= etot)], prm)
                # p4 <= u_max as well
                lo = max(p0, float(inverse_energy(max(etot - e_edges[-1], 0.0), prm)))
                if hi <= lo:
                    continue
                # min(p3, p4) switches at E3 = etot / 2
                br = _breaks(lo, hi, edges, cross, [p1, pb, float(inverse_energy(0.5 * etot, prm))])
                if hi == p3max and br.size > 2:
                    # last piece in the p4 variable: p4 = E^-1(E1+E2-E3) has a
                    # square-root endpoint where p4 -> 0
                    p3, w3 = _gl_segments(br[:-1], self.order)
                    e4 = etot - energy(p3, prm)
                    p4 = inverse_energy(np.maximum(e4, 0.0), prm)
                    jac = 1.0 / energy_derivative(p4, prm)
                    p4top = float(inverse_energy(max(etot - float(energy(br[-2], prm)), 0.0), prm))
                    t4, tw = _gl_segments(np.array([p0, p4top]), self.order)
                    t3 = inverse_energy(np.maximum(etot - energy(t4, prm), 0.0), prm)
                    p3 = np.concatenate([p3, t3])
                    p4 = np.concatenate([p4, t4])
                    w3 = np.concatenate([w3, tw])
                    jac = np.concatenate([jac, 1.0 / energy_derivative(t3, prm)])
                else:
                    p3, w3 = _gl_segments(br, self.order)
                    e4 = etot - energy(p3, prm)
                    p4 = inverse_energy(np.maximum(e4, 0.0), prm)
                    jac = 1.0 / energy_derivative(p4, prm)
                q1 = np.full(p3.size, p1)
                q2 = np.full(p3.size, pb)
                mn = np.minimum(np.minimum(p1, pb), np.minimum(p3, p4))
                wt = (
                    prm.kappa3 * wb * w3 * k22(q1, q2, p3, p4, prm)
                    * mn * pb * p3 * p4 * jac / p1
                )
                owner.append(np.full(p3.size, i))
                w_all.append(wt)
                p2_all.append(q2)
                p3_all.append(p3)
                p4_all.append(p4)
        self._c22_owner = np.concatenate(owner)
        self._c22_w = np.concatenate(w_all)
        self._c22_f2 = Sampler(g, prm, np.concatenate(p2_all))
        self._c22_f3 = Sampler(g, prm, np.concatenate(p3_all))
        self._c22_f4 = Sampler(g, prm, np.concatenate(p4_all))

    # -- evaluation -------------------------------------------------------

    def _sum(self, owner, values):
        return np.bincount(owner, weights=values, minlength=self.grid.size)

    def _check(self, arr, what):
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.isfinite(arr))[0])
            raise CollisionError(f"non-finite {what} at node {bad} (u={self.grid.nodes[bad]:.6g})")
        return arr

    def c12_parts(self, state: DistributionState):
        """(gain, loss frequency) of C12; rate = gain - f * loss."""
        f = state.values
        c = self.e_nodes * f
        fu0, fr0 = self._c12_u0(c), self._c12_r0(c)
        fu1, fs1 = self._c12_u1(c), self._c12_s1(c)
        f1 = f[self._c12_owner1]
        w0, w1 = self._c12_w0, self._c12_w1
        gain = self._sum(self._c12_owner0, w0 * fr0 * fu0) + self._sum(
            self._c12_owner1, w1 * fs1 * (f1 + fu1 + 1.0)
        )
        loss = self._sum(self._c12_owner0, w0 * (fr0 + fu0 + 1.0)) + self._sum(self._c12_owner1, w1 * fu1)
        self._check(gain, "C12 gain")
        self._check(loss, "C12 loss frequency")
        return gain, loss

    def c12_subrates(self, state: DistributionState):
        """(C12^1, C12^2): the S^0 decay part and the S^1 merging part."""
        f = state.values
        c = self.e_nodes * f
        fu0, fr0 = self._c12_u0(c), self._c12_r0(c)
        fu1, fs1 = self._c12_u1(c), self._c12_s1(c)
        f0 = f[self._c12_owner0]
        f1 = f[self._c12_owner1]
        a = self._sum(self._c12_owner0, self._c12_w0 * (fr0 * fu0 - f0 * (fr0 + fu0 + 1.0)))
        b = self._sum(self._c12_owner1, self._c12_w1 * (fs1 * (f1 + fu1 + 1.0) - f1 * fu1))
        return self._check(a, "C12^1"), self._check(b, "C12^2")

    def c12(self, state: DistributionState) -> np.ndarray:
        a, b = self.c12_subrates(state)
        return a + b

    def _c22_samples(self, state):
        f = state.values
        c = self.e_nodes * f
        f1 = f[self._c22_owner]
        return f1, self._c22_f2(c), self._c22_f3(c), self._c22_f4(c)

    def c22_parts(self, state: DistributionState):
        """(gain, loss frequency) of C22 with gain (1+f1)(1+f2) f3 f4 and
        loss frequency f2 (1+f3)(1+f4)."""
        n = self.grid.size
        if not self._c22_active:
            return np.zeros(n), np.zeros(n)
        f1, f2, f3, f4 = self._c22_samples(state)
        w = self._c22_w
        gain = self._sum(self._c22_owner, w * (1.0 + f1) * (1.0 + f2) * f3 * f4)
        loss = self._sum(self._c22_owner, w * f2 * (1.0 + f3) * (1.0 + f4))
        return self._check(gain, "C22 gain"), self._check(loss, "C22 loss frequency")

    def c22(self, state: DistributionState) -> np.ndarray:
        if not self._c22_active:
            return np.zeros(self.grid.size)
        f1, f2, f3, f4 = self._c22_samples(state)
        w = self._c22_w
        rate = self._sum(self._c22_owner, w * (f3 * f4 * (1.0 + f1 + f2) - f1 * f2 * (1.0 + f3 + f4)))
        return self._check(rate, "C22")

    def c22_split_orders(self, state: DistributionState):
        """(C22^1, C22^2): the quadratic and the cubic part of C22."""
        n = self.grid.size
        if not self._c22_active:
            return np.zeros(n), np.zeros(n)
        f1, f2, f3, f4 = self._c22_samples(state)
        w = self._c22_w
        a = self._sum(self._c22_owner, w * (f3 * f4 - f1 * f2))
        b = self._sum(self._c22_owner, w * (f3 * f4 * (f1 + f2) - f1 * f2 * (f3 + f4)))
        return a, b

    def rates(self, state: DistributionState, conservation_fix: bool = False) -> CollisionRates:
        g12, l12 = self.c12_parts(state)
        g22, l22 = self.c22_parts(state)
        f = state.values
        c12 = g12 - f * l12
        c22 = g22 - f * l22
        q = c12 + c22
        if conservation_fix:
            q = project_energy(q, state, self.params)
        return CollisionRates(c12=c12, c22=c22, q=q, q_minus=l12 + l22, gain=g12 + g22)


def project_energy(q: np.ndarray, state: DistributionState, params: PhysicalParams) -> np.ndarray:
    """Remove the discrete energy production of a rate vector.

    Subtracts beta * f with beta chosen so that sum(vw * E * q) == 0; the
    correction is proportional to the state and therefore cannot create
    negative values faster than the loss term already does.
    """
    g = state.grid
    ew = g.volume_weights() * energy(g.nodes, params)
    denom = float(np.sum(ew * state.values))
    if denom <= 0:
        return q
    beta = float(np.sum(ew * q)) / denom
    return q - beta * state.values


_REGISTRY: dict = {}


def operator_for(grid: RadialGrid, params: PhysicalParams, order: int = 8, outer_order: int = 8) -> CollisionOperator:
    """Memoised :class:`CollisionOperator` for a grid/params pair."""
    key = (id(grid), params, order, outer_order)
    op = _REGISTRY.get(key)
    if op is None or op.grid is not grid:
        if len(_REGISTRY) > 8:
            _REGISTRY.clear()
        op = CollisionOperator(grid, params, order, outer_order)
        _REGISTRY[key] = op
    return op


def c12_apply(state: DistributionState, params: PhysicalParams) -> np.ndarray:
    return operator_for(state.grid, params).c12(state)


def c12_split(state: DistributionState, params: PhysicalParams):
    return operator_for(state.grid, params).c12_parts(state)


def c22_apply(state: DistributionState, params: PhysicalParams) -> np.ndarray:
    return operator_for(state.grid, params).c22(state)


def c22_split(state: DistributionState, params: PhysicalParams):
    return operator_for(state.grid, params).c22_parts(state)


def q_apply(state: DistributionState, params: PhysicalParams, conservation_fix: bool = False) -> CollisionRates:
    return operator_for(state.grid, params).rates(state, conservation_fix)


def weak_form(state: DistributionState, phi, which: str, params: PhysicalParams, rates=None) -> float:
    """int C[f](p) phi(p) dp over R^3 for C in {c12, c22, q}."""
    if rates is None:
        op = operator_for(state.grid, params)
        if which == "c12":
            rate = op.c12(state)
        elif which == "c22":
            rate = op.c22(state)
        elif which == "q":
            rate = op.rates(state).q
        else:
            raise ValueError(f"unknown operator {which!r}")
    else:
        rate = np.asarray(rates)
    phi = np.broadcast_to(np.asarray(phi, dtype=float), rate.shape)
    return float(np.sum(state.grid.volume_weights() * rate * phi))


def entropy_test_function(state: DistributionState) -> np.ndarray:
    """ln(f / (1 + f)), the test function of the H-functional."""
    f = state.values
    with np.errstate(divide="ignore"):
        return np.log(f) - np.log1p(f)
