"""Resonance manifolds S_p^0, S_p^1, S_p^2 and their radial surface weights.

For a radial integrand the co-area integral ``int F(|w|) / |grad H| dsigma``
over a resonance manifold collapses to a one-dimensional integral in the
magnitude ``u = |w|``.  Writing ``w`` in spherical coordinates about ``p``
gives ``d^3w = (u r / |p|) du dr dphi`` with ``r`` the partner magnitude, and
the energy delta in ``r`` contributes ``1 / E'(r)``; hence

    S^0:  2 pi u r / (|p| E'(r))  with  E(r) = E(p) - E(u)
    S^1:  2 pi u s / (|p| E'(s))  with  E(s) = E(p) + E(u)
    S^2:  2 pi v u / (|p| E'(u))  with  E(u) = E(v) - E(p),  v = |p_*|

The (gamma, q) parametrisation ``W = gamma p + q e_perp`` is kept for the
geometric checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .physics import DomainError, PhysicalParams, energy, energy_derivative, inverse_energy

TWO_PI = 2.0 * math.pi


class BracketError(RuntimeError):
    """Bisection could not bracket a root (dispersion misconfigured)."""


@dataclass(frozen=True)
class ManifoldPoint:
    gamma: float
    q: float
    u: float
    partner: float


def _ep(x, params):
    return energy(np.abs(x), params)


def h0(p_mag, gamma, q, params: PhysicalParams):
    """E(p - w) + E(w) - E(p) at w = gamma p + q e_perp."""
    w = np.sqrt((gamma * p_mag) ** 2 + q * q)
    pw = np.sqrt(((1.0 - gamma) * p_mag) ** 2 + q * q)
    return _ep(pw, params) + _ep(w, params) - energy(p_mag, params)


def h1(p_mag, gamma, q, params: PhysicalParams):
    """E(p + w) - E(p) - E(w) at w = gamma p + q e_perp."""
    w = np.sqrt((gamma * p_mag) ** 2 + q * q)
    pw = np.sqrt(((1.0 + gamma) * p_mag) ** 2 + q * q)
    return _ep(pw, params) - energy(p_mag, params) - _ep(w, params)


def h2(p_mag, gamma, q, params: PhysicalParams):
    """E(x) - E(p) - E(x - p) at x = gamma p + q e_perp."""
    x = np.sqrt((gamma * p_mag) ** 2 + q * q)
    xp = np.sqrt(((gamma - 1.0) * p_mag) ** 2 + q * q)
    return _ep(x, params) - energy(p_mag, params) - _ep(xp, params)


def _bisect(fun, lo, hi, tol, max_iter=200):
    flo = fun(lo)
    fhi = fun(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise BracketError(f"no sign change on [{lo}, {hi}]: f={flo}, {fhi}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = fun(mid)
        if abs(fm) <= tol or hi - lo <= 4 * np.finfo(float).eps * max(abs(mid), 1.0):
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_q_gamma_s0(p_mag: float, gamma: float, params: PhysicalParams, tol: float | None = None) -> float:
    """Transverse coordinate of the unique S_p^0 point above gamma * p.

    H_0^p is negative at q = 0 and strictly increasing in q, and the root
    satisfies q < |p|, so bisection on (0, |p|] always converges.
    """
    if not (0.0 < gamma < 1.0):
        raise DomainError(f"gamma must lie in (0, 1), got {gamma}")
    if not p_mag > 0:
        raise DomainError("p_mag must be > 0")
    if tol is None:
        # bisect to the bracket floor: H is flat in q near q = 0
        tol = 0.0
    return _bisect(lambda q: h0(p_mag, gamma, q, params), 0.0, p_mag, tol)


def gamma_max_s1(p_mag, params: PhysicalParams):
    """Upper end gamma_p of the longitudinal range covered by S_p^1."""
    p = np.asarray(p_mag, dtype=float)
    if np.any(p <= 0):
        raise DomainError("p_mag must be > 0")
    k1, k2 = params.kappa1, params.kappa2
    out = 0.5 * k1 / (k2 * p * p + 2.0 * math.sqrt(k2) * np.sqrt(k1 * p * p + k2 * p**4))
    return out if out.ndim else float(out)


def solve_q_gamma_s1(p_mag: float, gamma: float, params: PhysicalParams, tol: float | None = None) -> float:
    """Transverse coordinate of the S_p^1 point above gamma * p, 0 < gamma < gamma_p."""
    gp = gamma_max_s1(p_mag, params)
    if not (0.0 < gamma < gp):
        raise DomainError(f"gamma must lie in (0, {gp}), got {gamma}")
    if tol is None:
        tol = 0.0
    fun = lambda q: h1(p_mag, gamma, q, params)  # noqa: E731
    hi = p_mag
    while fun(hi) > 0:
        hi *= 2.0
        if hi > 1e12 * max(p_mag, 1.0):
            raise BracketError("S1 root escaped to infinity")
    return _bisect(fun, 0.0, hi, tol)


def s0_point(p_mag: float, gamma: float, params: PhysicalParams) -> ManifoldPoint:
    q = solve_q_gamma_s0(p_mag, gamma, params)
    u = math.hypot(gamma * p_mag, q)
    r = math.hypot((1.0 - gamma) * p_mag, q)
    return ManifoldPoint(gamma, q, u, r)


def s1_point(p_mag: float, gamma: float, params: PhysicalParams) -> ManifoldPoint:
    q = solve_q_gamma_s1(p_mag, gamma, params)
    u = math.hypot(gamma * p_mag, q)
    s = math.hypot((1.0 + gamma) * p_mag, q)
    return ManifoldPoint(gamma, q, u, s)


def s0_partner(p_mag, u, params: PhysicalParams):
    """|p - w| on S_p^0 for |w| = u, from E(p - w) = E(p) - E(w)."""
    p = np.asarray(p_mag, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0) or np.any(u >= p):
        raise DomainError("s0_partner requires 0 < u < p_mag")
    de = energy(p, params) - energy(u, params)
    return inverse_energy(np.maximum(de, 0.0), params)


def s0_weight(p_mag, u, params: PhysicalParams):
    """Reduced S^0 surface measure per unit du (azimuth integrated)."""
    p = np.asarray(p_mag, dtype=float)
    u = np.asarray(u, dtype=float)
    r = s0_partner(p, u, params)
    out = TWO_PI * u * r / (p * energy_derivative(r, params))
    return out if np.ndim(out) else float(out)


def s1_partner(p_mag, u, params: PhysicalParams):
    """|p + w| on S_p^1 for |w| = u, from E(p + w) = E(p) + E(w)."""
    p = np.asarray(p_mag, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(p <= 0) or np.any(u < 0):
        raise DomainError("s1_partner requires p_mag > 0 and u >= 0")
    return inverse_energy(energy(p, params) + energy(u, params), params)


def s1_weight(p_mag, u, params: PhysicalParams):
    """Reduced S^1 surface measure per unit du (azimuth integrated)."""
    p = np.asarray(p_mag, dtype=float)
    u = np.asarray(u, dtype=float)
    s = s1_partner(p, u, params)
    out = TWO_PI * u * s / (p * energy_derivative(s, params))
    return out if np.ndim(out) else float(out)


def s2_partner(p_mag, v, params: PhysicalParams):
    """|p_* - p| on S_p^2 for |p_*| = v > |p|."""
    p = np.asarray(p_mag, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(v <= p):
        raise DomainError("s2_partner requires v > p_mag")
    return inverse_energy(energy(v, params) - energy(p, params), params)


def s2_weight(p_mag, v, params: PhysicalParams):
    """Reduced S^2 surface measure per unit dv, v = |p_*| on S_p^2."""
    p = np.asarray(p_mag, dtype=float)
    v = np.asarray(v, dtype=float)
    u = s2_partner(p, v, params)
    out = TWO_PI * v * u / (p * energy_derivative(u, params))
    return out if np.ndim(out) else float(out)


def q_half_closed_form(p_mag, params: PhysicalParams):
    """q_{1/2} from 2 E(W_{1/2}) = E(p): positive root x = q^2 of
    4 k2 x^2 + (4 k1 + 2 k2 p^2) x - (3/4) k2 p^4 = 0."""
    k1, k2 = params.kappa1, params.kappa2
    p2 = np.asarray(p_mag, dtype=float) ** 2
    a = 4.0 * k2
    b = 4.0 * k1 + 2.0 * k2 * p2
    c = 0.75 * k2 * p2 * p2
    x = 2.0 * c / (b + np.sqrt(b * b + 4.0 * a * c))
    out = np.sqrt(x)
    return out if out.ndim else float(out)


def surface_integral(p_mag: float, family: str, F, params: PhysicalParams, u_cap: float, panels: int = 64, order: int = 8) -> float:
    """int_{S_p^i} F / |grad H_i^p| dsigma via the reduced one-dimensional form.

    ``F(a, b)`` receives the integration magnitude and its partner:
    (|w|, |p - w|) on S0, (|w|, |p + w|) on S1 and (|p_*|, |p_* - p|) on S2.
    ``u_cap`` truncates the unbounded S1/S2 ranges.
    """
    x, w = np.polynomial.legendre.leggauss(order)
    if family == "S0":
        lo, hi = 0.0, p_mag
    elif family == "S1":
        lo, hi = 0.0, u_cap
    elif family == "S2":
        lo, hi = p_mag, max(u_cap, p_mag)
    else:
        raise DomainError(f"unknown family {family!r}")
    if hi <= lo:
        return 0.0
    edges = np.linspace(lo, hi, panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    u = (0.5 * (a + b) + 0.5 * (b - a) * x).ravel()
    wt = (0.5 * (b - a) * w).ravel()
    if family == "S0":
        return float(np.sum(wt * s0_weight(p_mag, u, params) * F(u, s0_partner(p_mag, u, params))))
    if family == "S1":
        return float(np.sum(wt * s1_weight(p_mag, u, params) * F(u, s1_partner(p_mag, u, params))))
    return float(np.sum(wt * s2_weight(p_mag, u, params) * F(u, s2_partner(p_mag, u, params))))
