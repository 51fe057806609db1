"""Brute-force reference evaluations used to certify the production quadratures.

Energy deltas are replaced by normalised Gaussians of width eps and the
remaining integrals are done on dense tensor grids; the eps -> 0 limit is
taken by fitting a + b eps + c eps^2 through three geometric widths.  The
C12 reference works in 3D spherical coordinates (|p2|, cos theta) with the
momentum delta resolved, so it shares no reduction formula with the
production code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import manifolds
from .collision import operator_for
from .grid import DistributionState, Interpolant, RadialGrid, from_profile
from .physics import PhysicalParams, bogoliubov_uv, energy, energy_derivative, inverse_energy, k12

TWO_PI = 2.0 * math.pi
SQRT_2PI = math.sqrt(2.0 * math.pi)


class GeometryViolation(AssertionError):
    """A dense scan found zero or several roots where exactly one is expected."""


def gaussian(x, eps):
    return np.exp(-0.5 * (x / eps) ** 2) / (SQRT_2PI * eps)


def _gl(lo, hi, panels, order=8):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    return (0.5 * (a + b) + 0.5 * (b - a) * x).ravel(), (0.5 * (b - a) * w).ravel()


def _gl_breaks(breaks, per, order=8):
    pts, wts = [], []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi > lo:
            x, w = _gl(lo, hi, per, order)
            pts.append(x)
            wts.append(w)
    return np.concatenate(pts), np.concatenate(wts)


@dataclass(frozen=True)
class Extrapolated:
    """eps -> 0 limit of a smoothed quantity."""

    value: float
    samples: tuple
    eps: tuple
    residual: float

    def as_dict(self) -> dict:
        return {"value": self.value, "samples": list(self.samples), "eps": list(self.eps), "residual": self.residual}


def extrapolate(eps, values) -> Extrapolated:
    """Fit a + b e + c e^2 through three points and return a.

    ``residual`` is the distance between the limit and the smallest-eps sample.
    """
    e = np.asarray(eps, dtype=float)
    v = np.asarray(values, dtype=float)
    A = np.stack([np.ones_like(e), e, e * e], axis=-1)
    coef = np.linalg.solve(A, v)
    a = float(coef[0])
    i = int(np.argmin(e))
    return Extrapolated(a, tuple(map(float, v)), tuple(map(float, e)), float(abs(a - v[i])))


def _profile_of(state_or_profile, params):
    """Callable f(u) from an analytic profile or a state (own interpolation)."""
    if isinstance(state_or_profile, DistributionState):
        st = state_or_profile
        interp = Interpolant(st, params)
        return lambda u: interp(u)
    return state_or_profile


def _uv(u, params):
    return bogoliubov_uv(np.maximum(u, params.u_floor), params)


# -- C12 ---------------------------------------------------------------------


def _c12_terms(f, p1, params, u_max, n_u=48, n_mu=2048):
    """Dense (u, mu) samples of both C12 channels, independent of eps.

    Returns (h, weight, gain, loss) arrays for each channel, where the
    smoothed rate is sum(weight * G_eps(h) * (gain - f1 * loss)).
    """
    f1 = float(f(np.array([p1]))[0])
    e1 = float(energy(p1, params))
    # node placement only: the merged momentum reaches u_max near this |p3|
    u_top = float(inverse_energy(max(float(energy(u_max, params)) - e1, 0.0), params))
    u, wu = _gl_breaks(np.unique([0.0, min(p1, u_max), u_top, u_max]), n_u // 8 if n_u >= 8 else 1)
    mu, wmu = _gl(-1.0, 1.0, n_mu // 8)
    U, M = np.meshgrid(u, mu, indexing="ij")
    W = (TWO_PI * u * u * wu)[:, None] * wmu[None, :]
    eu = energy(U, params)
    fu = f(U)
    pref = params.c12_prefactor
    out = []
    # decay p1 -> p2 + p3, p2 = (u, mu), p3 = p1 - p2
    r = np.sqrt(np.maximum(p1 * p1 + U * U - 2.0 * p1 * U * M, 0.0))
    inside = r <= u_max
    fr = np.where(inside, f(np.minimum(r, u_max)), 0.0)
    K = k12(np.full(U.shape, p1), U, r, params)
    h = e1 - eu - energy(r, params)
    wt = np.where(inside, pref * W * K, 0.0)
    out.append((h, wt, fu * fr, fu + fr + 1.0))
    # merging p1 + p3 -> s, p3 = (u, mu)
    s = np.sqrt(p1 * p1 + U * U + 2.0 * p1 * U * M)
    inside = s <= u_max
    fs = np.where(inside, f(np.minimum(s, u_max)), 0.0)
    K = k12(s, np.full(U.shape, p1), U, params)
    h = energy(s, params) - e1 - eu
    wt = np.where(inside, 2.0 * pref * W * K, 0.0)
    out.append((h, wt, fs * (f1 + fu + 1.0), fu))
    return f1, out


def c12_reference(state_or_profile, p1_mag: float, eps, params: PhysicalParams, u_max: float = 6.0, n_u: int = 128, n_mu: int = 4096) -> dict:
    """Smoothed-delta C12 at one momentum, with its eps -> 0 extrapolation.

    ``eps`` is a sequence of three widths (or a single float, in which case
    no extrapolation is done).  Returns rate, gain and loss frequency.
    """
    f = _profile_of(state_or_profile, params)
    f1, chans = _c12_terms(f, p1_mag, params, u_max, n_u, n_mu)
    eps_seq = np.atleast_1d(np.asarray(eps, dtype=float))
    gains, losses = [], []
    for e in eps_seq:
        g = sum(float(np.sum(w * gaussian(h, e) * gn)) for h, w, gn, _ in chans)
        lo = sum(float(np.sum(w * gaussian(h, e) * ls)) for h, w, _, ls in chans)
        gains.append(g)
        losses.append(lo)
    return _package(f1, eps_seq, gains, losses)


def _package(f1, eps_seq, gains, losses):
    if eps_seq.size == 3:
        g = extrapolate(eps_seq, gains)
        lo = extrapolate(eps_seq, losses)
        gain, loss = g.value, lo.value
        resid = max(g.residual, f1 * lo.residual)
    else:
        gain, loss = gains[-1], losses[-1]
        resid = math.nan
    return {
        "rate": gain - f1 * loss,
        "gain": gain,
        "loss_frequency": loss,
        "f1": f1,
        "scale": abs(gain) + abs(f1 * loss),
        "extrapolation_residual": resid,
        "samples": {"eps": eps_seq.tolist(), "gain": list(gains), "loss": list(losses)},
    }


# -- C22 ---------------------------------------------------------------------


def c22_reference(state_or_profile, p1_mag: float, eps, params: PhysicalParams, u_max: float = 6.0, n2: int = 160, n3: int = 160, n4: int = 48, width: float = 7.0) -> dict:
    """Smoothed-delta C22 at one momentum on a dense (p2, p3, p4) tensor.

    For each (p2, p3) the p4 nodes are placed on a window of +-``width``
    eps around the resonant energy (a change of variables to E4), so that
    every eps is resolved with a fixed number of points.
    """
    f = _profile_of(state_or_profile, params)
    p1 = float(p1_mag)
    f1 = float(f(np.array([p1]))[0])
    eps_seq = np.atleast_1d(np.asarray(eps, dtype=float))
    p0 = params.p0
    if p1 < p0 or params.kappa3 == 0:
        return _package(f1, eps_seq, [0.0] * eps_seq.size, [0.0] * eps_seq.size)
    br = np.unique([p0, min(max(p1, p0), u_max), u_max])
    p2, w2 = _gl_breaks(br, max(n2 // 16, 1))
    p3, w3 = _gl_breaks(br, max(n3 // 16, 1))
    P2, P3 = np.meshgrid(p2, p3, indexing="ij")
    W23 = w2[:, None] * w3[None, :]
    e1 = float(energy(p1, params))
    e0 = float(energy(p0, params))
    emax = float(energy(u_max, params))
    ec = e1 + energy(P2, params) - energy(P3, params)
    U1, V1 = _uv(np.array(p1), params)
    U2, V2 = _uv(P2, params)
    U3, V3 = _uv(P3, params)
    f2, f3 = f(P2), f(P3)
    t, wt = _gl(-width, width, max(n4 // 8, 1))
    gains, losses = [], []
    for e in eps_seq:
        g_acc = 0.0
        l_acc = 0.0
        for tk, wk in zip(t, wt):
            e4 = ec + e * tk
            ok = (e4 >= e0) & (e4 <= emax)
            p4 = inverse_energy(np.where(ok, e4, e0), params)
            U4, V4 = _uv(p4, params)
            a = (
                U1 * U2 * U3 * U4 + U1 * V2 * U3 * V4 + U1 * V2 * V3 * U4
                + V1 * U2 * U3 * V4 + V1 * U2 * V3 * U4 + V1 * V2 * V3 * V4
            )
            mn = np.minimum(np.minimum(p1, P2), np.minimum(P3, p4))
            # dp4 = dE4 / E'(p4);  G_eps(E1 + E2 - E3 - E4) dE4 = G(-eps t) eps dt
            dens = gaussian(e * tk, e) * e * wk / energy_derivative(p4, params)
            base = np.where(ok, params.kappa3 * a * a * mn * P2 * P3 * p4 / p1 * dens * W23, 0.0)
            f4 = f(p4)
            g_acc += float(np.sum(base * (1.0 + f1) * (1.0 + f2) * f3 * f4))
            l_acc += float(np.sum(base * f2 * (1.0 + f3) * (1.0 + f4)))
        gains.append(g_acc)
        losses.append(l_acc)
    return _package(f1, eps_seq, gains, losses)


# -- surfaces and roots -------------------------------------------------------


def surface_area_reference(p_mag: float, family: str, F, eps, params: PhysicalParams, u_cap: float = 10.0, n_u: int = 512, n_mu: int = 16384) -> Extrapolated | float:
    """Volume integral of F * G_eps(H_i^p) over R^3 (co-area surrogate).

    ``F(a, b)`` follows the convention of :func:`manifolds.surface_integral`.
    """
    p = float(p_mag)
    ep = float(energy(p, params))
    e_top = float(np.max(np.atleast_1d(eps)))
    if family == "S0":
        # the smoothed shell reaches slightly past |w| = p
        hi = float(inverse_energy(ep + 8.0 * e_top, params))
        u, wu = _gl(0.0, min(hi, u_cap), max(n_u // 8, 1))
    else:
        u, wu = _gl_breaks(np.unique([0.0, min(p, u_cap), u_cap]), max(n_u // 16, 1))
    mu, wmu = _gl(-1.0, 1.0, max(n_mu // 8, 1))
    U, M = np.meshgrid(u, mu, indexing="ij")
    W = (TWO_PI * u * u * wu)[:, None] * wmu[None, :]
    if family == "S0":
        other = np.sqrt(np.maximum(p * p + U * U - 2.0 * p * U * M, 0.0))
        h = energy(other, params) + energy(U, params) - ep
    elif family == "S1":
        other = np.sqrt(p * p + U * U + 2.0 * p * U * M)
        h = energy(other, params) - ep - energy(U, params)
    elif family == "S2":
        other = np.sqrt(np.maximum(U * U + p * p - 2.0 * p * U * M, 0.0))
        h = energy(U, params) - ep - energy(other, params)
    else:
        raise ValueError(f"unknown family {family!r}")
    base = W * F(U, other)
    vals = [float(np.sum(base * gaussian(h, e))) for e in np.atleast_1d(eps)]
    if len(vals) == 3:
        return extrapolate(np.atleast_1d(eps), vals)
    return vals[-1]


def q_gamma_reference(p_mag: float, gamma: float, params: PhysicalParams, resolution: float = 1e-5) -> float:
    """Root of H_0^p(gamma p + q e_perp) in q by a dense sign-change scan."""
    p = float(p_mag)
    q = np.linspace(0.0, p, int(round(1.0 / resolution)) + 1)
    h = manifolds.h0(p, gamma, q, params)
    s = np.sign(h)
    idx = np.flatnonzero(s[:-1] * s[1:] < 0)
    zeros = np.flatnonzero(s == 0)
    if idx.size + zeros.size != 1:
        raise GeometryViolation(f"{idx.size + zeros.size} sign changes at p={p}, gamma={gamma}")
    if zeros.size:
        return float(q[zeros[0]])
    i = idx[0]
    # linear interpolation inside the bracketing cell
    return float(q[i] - h[i] * (q[i + 1] - q[i]) / (h[i + 1] - h[i]))


# -- certification -----------------------------------------------------------


# widths relative to the local energy E(p1) (C12, surfaces) or absolute (C22)
DEFAULT_EPS_C12 = (0.04, 0.02, 0.01)
DEFAULT_EPS_C22 = (0.2, 0.1, 0.05)
DEFAULT_EPS_SURFACE = (0.01, 0.005, 0.0025)


def default_test_profile(u):
    """Smooth, well-resolved Gaussian used by the collision certification."""
    u = np.asarray(u, dtype=float)
    return 0.6 * np.exp(-(((u - 1.8) / 1.0) ** 2))


def certify_collisions(grid: RadialGrid, params: PhysicalParams, profile=default_test_profile, tol: float = 0.02, eps_c12=DEFAULT_EPS_C12, eps_c22=DEFAULT_EPS_C22, nodes=None) -> dict:
    """Compare production C12/C22 with the extrapolated references node-wise.

    The error at a node is |production - reference| / (gain + f * loss) of
    the reference, i.e. relative to the magnitude of the two competing
    terms rather than to their (possibly cancelling) difference.
    """
    state = from_profile(grid, profile)
    op = operator_for(grid, params)
    prod = {"c12": op.c12(state), "c22": op.c22(state)}
    idx = range(grid.size) if nodes is None else nodes
    report = {"tol": tol, "eps_c12": list(eps_c12), "eps_c22": list(eps_c22), "nodes": []}
    worst = {"c12": 0.0, "c22": 0.0}
    for i in idx:
        p = float(grid.nodes[i])
        e1 = float(energy(p, params))
        r12 = c12_reference(profile, p, tuple(x * e1 for x in eps_c12), params, u_max=grid.u_max)
        r22 = c22_reference(profile, p, eps_c22, params, u_max=grid.u_max)
        row = {"u": p}
        for name, ref in (("c12", r12), ("c22", r22)):
            scale = ref["scale"]
            err = abs(prod[name][i] - ref["rate"]) / scale if scale > 0 else abs(prod[name][i])
            worst[name] = max(worst[name], err)
            row[name] = {
                "production": float(prod[name][i]),
                "reference": ref["rate"],
                "scale": scale,
                "rel_error": err,
                "extrapolation_residual": ref["extrapolation_residual"],
            }
        report["nodes"].append(row)
    report["max_rel_error"] = worst
    report["passed"] = bool(max(worst.values()) <= tol)
    return report


def certify_surfaces(params: PhysicalParams, p_values=(0.5, 1.0, 2.0, 4.0), tol: float = 0.01, eps=DEFAULT_EPS_SURFACE, u_cap: float = 10.0) -> dict:
    """Reduced surface integrals against smoothed volume integrals."""

    def F(a, b):
        return np.exp(-0.25 * (a * a + b * b))

    rows = []
    worst = 0.0
    for p in p_values:
        for fam in ("S0", "S1", "S2"):
            red = manifolds.surface_integral(p, fam, F, params, u_cap)
            ep = float(energy(p, params))
            ref = surface_area_reference(p, fam, F, tuple(x * ep for x in eps), params, u_cap=u_cap + p)
            err = abs(red - ref.value) / abs(ref.value)
            worst = max(worst, err)
            rows.append({"p": p, "family": fam, "reduced": red, "reference": ref.value, "rel_error": err, "extrapolation_residual": ref.residual})
    return {"tol": tol, "rows": rows, "max_rel_error": worst, "passed": bool(worst <= tol)}


def certify_roots(params: PhysicalParams, p_values=(0.1, 1.0, 2.0, 10.0), gammas=(0.1, 0.25, 0.5, 0.75, 0.9)) -> dict:
    """Bisection roots on S^0 against dense scans and the gamma = 1/2 closed form."""
    rows = []
    ok = True
    for p in p_values:
        for g in gammas:
            q_b = manifolds.solve_q_gamma_s0(p, g, params)
            try:
                q_s = q_gamma_reference(p, g, params)
                err = abs(q_b - q_s)
                good = err <= 2e-5 * p
            except GeometryViolation as exc:
                q_s, err, good = None, None, False
                rows.append({"p": p, "gamma": g, "error": str(exc)})
            ok &= good
            rows.append({"p": p, "gamma": g, "bisection": q_b, "scan": q_s, "abs_error": err, "ok": good})
        half = manifolds.q_half_closed_form(p, params)
        qb = manifolds.solve_q_gamma_s0(p, 0.5, params)
        rel = abs(qb - half) / half
        ok &= rel <= 1e-10
        rows.append({"p": p, "gamma": 0.5, "closed_form": half, "bisection": qb, "rel_error": rel})
    return {"rows": rows, "passed": bool(ok)}
