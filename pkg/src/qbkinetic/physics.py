"""Bogoliubov dispersion, Bogoliubov coefficients and transition kernels.

Reduced units with hbar = 1 throughout.  Every function accepts scalars or
numpy arrays of momentum magnitudes and broadcasts.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a formula."""


@dataclass(frozen=True)
class PhysicalParams:
    """Physical constants of the condensate / thermal-cloud model.

    ``kappa1``, ``kappa2`` and ``p0`` are derived from ``m``, ``g`` and
    ``n_c`` unless explicitly overridden.  ``lambda1`` and ``lambda2``
    default to ``2 g^2 n_c / (2 pi)^2`` and ``2 g^2 / (2 pi)^5``.
    ``gamma_cap`` is the bound of the C22 kernel; when left at ``None`` it is
    measured by :func:`measure_gamma_cap`.
    """

    m: float = 1.0
    g: float = 1.0
    n_c: float = 0.5
    lambda1: float | None = None
    lambda2: float | None = None
    kappa3: float = 1.0
    kappa1_override: float | None = None
    kappa2_override: float | None = None
    gamma_cap: float | None = None
    u_floor: float = 1e-10
    kappa1: float = field(init=False)
    kappa2: float = field(init=False)
    p0: float = field(init=False)

    def __post_init__(self):
        for name in ("m", "g", "n_c", "kappa3", "u_floor"):
            val = getattr(self, name)
            if not math.isfinite(val):
                raise DomainError(f"{name} must be finite, got {val!r}")
        if self.m <= 0:
            raise DomainError(f"m must be > 0, got {self.m}")
        for name in ("g", "n_c", "kappa3"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0")
        k1 = self.g * self.n_c / self.m
        k2 = 1.0 / (4.0 * self.m**2)
        if self.kappa1_override is not None:
            k1 = float(self.kappa1_override)
        if self.kappa2_override is not None:
            k2 = float(self.kappa2_override)
        if not (math.isfinite(k1) and math.isfinite(k2)) or k1 < 0:
            raise DomainError("kappa1 must be finite and >= 0")
        if k2 <= 0:
            # pure phonon branch is not supported
            raise DomainError(f"kappa2 must be > 0, got {k2}")
        object.__setattr__(self, "kappa1", k1)
        object.__setattr__(self, "kappa2", k2)
        object.__setattr__(self, "p0", 2.0 * self.m * self.n_c * self.g)
        if self.lambda1 is None:
            object.__setattr__(
                self, "lambda1", 2.0 * self.g**2 * self.n_c / (2.0 * math.pi) ** 2
            )
        if self.lambda2 is None:
            object.__setattr__(self, "lambda2", 2.0 * self.g**2 / (2.0 * math.pi) ** 5)
        for name in ("lambda1", "lambda2"):
            val = getattr(self, name)
            if not math.isfinite(val) or val < 0:
                raise DomainError(f"{name} must be finite and >= 0")
        if self.gamma_cap is not None and not (self.gamma_cap > 0):
            raise DomainError("gamma_cap must be > 0")

    @property
    def gn_c(self) -> float:
        return self.g * self.n_c

    @property
    def c12_prefactor(self) -> float:
        """n_c * lambda1, the constant in front of every C12 integral."""
        return self.n_c * self.lambda1

    def inputs(self) -> dict:
        """Constructor arguments, suitable for re-creating the object."""
        d = asdict(self)
        for k in ("kappa1", "kappa2", "p0"):
            d.pop(k)
        return d

    def derived(self) -> dict:
        return {
            "kappa1": self.kappa1,
            "kappa2": self.kappa2,
            "p0": self.p0,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
        }

    def digest(self) -> str:
        blob = json.dumps(self.inputs(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _check_momentum(u):
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise DomainError("momentum must be finite")
    if np.any(u < 0):
        raise DomainError("momentum magnitude must be >= 0")
    return u


def energy(u, params: PhysicalParams):
    """Quasiparticle energy sqrt(k1 u^2 + k2 u^4)."""
    u = _check_momentum(u)
    return u * np.sqrt(params.kappa1 + params.kappa2 * u * u)


def energy_derivative(u, params: PhysicalParams):
    """d(energy)/du = (k1 + 2 k2 u^2) / sqrt(k1 + k2 u^2).

    With ``kappa1 == 0`` the formula degenerates at ``u == 0``; the limit
    value 0 is returned there (see :func:`is_degenerate_derivative`).
    """
    u = _check_momentum(u)
    k1, k2 = params.kappa1, params.kappa2
    num = k1 + 2.0 * k2 * u * u
    den = np.sqrt(k1 + k2 * u * u)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return out if out.ndim else float(out)


def is_degenerate_derivative(u, params: PhysicalParams) -> bool:
    return params.kappa1 == 0.0 and bool(np.any(np.asarray(u) == 0.0))


def inverse_energy(e, params: PhysicalParams):
    """Momentum magnitude with the given energy (closed form)."""
    e = np.asarray(e, dtype=float)
    if not np.all(np.isfinite(e)) or np.any(e < 0):
        raise DomainError("energy must be finite and >= 0")
    k1, k2 = params.kappa1, params.kappa2
    # u^2 = (-k1 + sqrt(k1^2 + 4 k2 e^2)) / (2 k2), rationalised to avoid
    # cancellation when 4 k2 e^2 << k1^2
    disc = np.sqrt(k1 * k1 + 4.0 * k2 * e * e)
    den = k1 + disc
    u2 = np.where(den > 0, 2.0 * e * e / np.where(den > 0, den, 1.0), 0.0)
    out = np.sqrt(u2)
    return out if out.ndim else float(out)


def bogoliubov_uv(u, params: PhysicalParams):
    """Bogoliubov coefficients (u_p, v_p) with u_p^2 - v_p^2 = 1.

    Arguments below ``params.u_floor`` are rejected; callers that need the
    small-momentum limit clamp first (see :func:`k12`).
    """
    u = _check_momentum(u)
    if np.any(u <= 0):
        raise DomainError("bogoliubov_uv is singular at zero momentum")
    e = energy(u, params)
    free = u * u / (2.0 * params.m)
    # u_p^2 = (free + g n_c + E) / (2E),  v_p^2 = (free + g n_c - E) / (2E)
    up2 = (free + params.gn_c + e) / (2.0 * e)
    # free + g n_c - E = (free + g n_c)^2 - E^2 over (free + g n_c + E);
    # the numerator is (g n_c)^2 when kappa1, kappa2 are not overridden
    a = free + params.gn_c
    vp2 = (a * a - e * e) / ((a + e) * 2.0 * e)
    vp2 = np.maximum(vp2, 0.0)
    return np.sqrt(up2), np.sqrt(vp2)


def _clamped_uv(u, params):
    u = np.maximum(np.asarray(u, dtype=float), params.u_floor)
    return bogoliubov_uv(u, params)


def a12(u1, u2, u3, params: PhysicalParams):
    """Scattering amplitude A12 for the decay u1 -> u2 + u3."""
    U1, V1 = _clamped_uv(u1, params)
    U2, V2 = _clamped_uv(u2, params)
    U3, V3 = _clamped_uv(u3, params)
    return (
        (U3 - V3) * (U1 * U2 + V1 * V2)
        + (U2 - V2) * (U1 * U3 + V1 * V3)
        - (U1 - V1) * (U2 * V3 + V2 * U3)
    )


def k12(u1, u2, u3, params: PhysicalParams):
    """C12 transition kernel |A12|^2 (symmetric in its last two arguments).

    Zero arguments are clamped to ``params.u_floor``.
    """
    a = a12(u1, u2, u3, params)
    return a * a


def a22(u1, u2, u3, u4, params: PhysicalParams):
    U1, V1 = _clamped_uv(u1, params)
    U2, V2 = _clamped_uv(u2, params)
    U3, V3 = _clamped_uv(u3, params)
    U4, V4 = _clamped_uv(u4, params)
    return (
        U1 * U2 * U3 * U4
        + U1 * V2 * U3 * V4
        + U1 * V2 * V3 * U4
        + V1 * U2 * U3 * V4
        + V1 * U2 * V3 * U4
        + V1 * V2 * V3 * V4
    )


def k22(u1, u2, u3, u4, params: PhysicalParams):
    """Cut-off C22 kernel |A22|^2 * 1{all |p_i| >= p0}."""
    u1, u2, u3, u4 = (_check_momentum(x) for x in (u1, u2, u3, u4))
    inside = (u1 >= params.p0) & (u2 >= params.p0) & (u3 >= params.p0) & (u4 >= params.p0)
    a = a22(u1, u2, u3, u4, params)
    out = np.where(inside, a * a, 0.0)
    return out if out.ndim else float(out)


def measure_gamma_cap(params: PhysicalParams, n: int = 40, span: float = 20.0) -> float:
    """Largest value of the C22 kernel on the energy-resonant slice.

    Samples (u1, u2, u3) on a geometric grid over [p0, span * p0]^3 (or
    [1, span] when p0 == 0), resolves u4 from energy conservation and
    returns the maximum of |A22|^2 over the admissible points.
    """
    lo = params.p0 if params.p0 > 0 else 1.0
    axis = np.geomspace(lo, span * lo, n)
    u1, u2, u3 = np.meshgrid(axis, axis, axis, indexing="ij")
    e4 = energy(u1, params) + energy(u2, params) - energy(u3, params)
    ok = e4 >= energy(lo, params)
    u4 = inverse_energy(np.where(ok, e4, 0.0), params)
    vals = k22(u1[ok], u2[ok], u3[ok], u4[ok], params)
    return float(np.max(vals)) if vals.size else 0.0
