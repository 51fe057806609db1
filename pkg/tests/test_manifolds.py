import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qbkinetic.manifolds import (
    gamma_max_s1,
    h0,
    h1,
    q_half_closed_form,
    s0_partner,
    s0_point,
    s0_weight,
    s1_partner,
    s1_point,
    s1_weight,
    s2_weight,
    solve_q_gamma_s0,
    surface_integral,
)
from qbkinetic.physics import DomainError, PhysicalParams, energy, inverse_energy, k12

UNIT = PhysicalParams(kappa1_override=1.0, kappa2_override=1.0)


def test_h0_examples():
    assert h0(2.0, 0.0, 0.0, UNIT) == pytest.approx(0.0, abs=1e-15)
    assert h0(2.0, 1.0, 0.0, UNIT) == pytest.approx(0.0, abs=1e-15)
    assert h0(2.0, 0.5, 0.0, UNIT) == pytest.approx(2 * math.sqrt(2) - math.sqrt(20), rel=1e-14)


def test_h0_negative_on_dense_grid():
    p = np.geomspace(0.01, 100.0, 100)[:, None]
    g = np.linspace(0.0, 1.0, 102)[1:-1][None, :]
    for prm in (UNIT, PhysicalParams(), PhysicalParams(n_c=0.0)):
        assert np.all(h0(p, g, 0.0, prm) < 0)


@given(st.floats(0.05, 20.0), st.floats(0.01, 0.99), st.floats(0.0, 5.0), st.floats(0.01, 1.0))
def test_h0_increasing_in_q(p, gamma, q, dq):
    assert h0(p, gamma, q + dq, UNIT) > h0(p, gamma, q, UNIT)


def test_q_half_reference_value():
    # x^2 + 3x - 3 = 0 at kappa1 = kappa2 = 1, |p| = 2
    assert q_half_closed_form(2.0, UNIT) ** 2 == pytest.approx((-3 + math.sqrt(21)) / 2, rel=1e-14)


@pytest.mark.parametrize("p", [0.1, 1.0, 2.0, 10.0])
def test_q_half_bisection_matches_closed_form(p):
    q = solve_q_gamma_s0(p, 0.5, UNIT)
    assert q == pytest.approx(q_half_closed_form(p, UNIT), rel=1e-10)


def test_q_half_large_p_scaling():
    q2 = solve_q_gamma_s0(10.0, 0.5, UNIT) ** 2
    # with k1 << k2 p^2 the root tends to (sqrt(7) - 1) p^2 / 8 ... bounded by c0 p^2, C0 p^2
    assert 0.1 * 100 < q2 < 100
    assert q2 == pytest.approx(q_half_closed_form(10.0, UNIT) ** 2, rel=1e-10)


@given(st.floats(0.05, 20.0), st.floats(0.01, 0.99))
def test_s0_point_geometry(p, gamma):
    pt = s0_point(p, gamma, PhysicalParams())
    assert 0 < pt.q < p
    assert pt.u < p and pt.partner < p
    assert pt.u**2 == pytest.approx((gamma * p) ** 2 + pt.q**2, rel=1e-12)
    assert abs(h0(p, gamma, pt.q, PhysicalParams())) <= 1e-12 * energy(p, PhysicalParams())


def test_q_gamma_endpoint_limit():
    assert solve_q_gamma_s0(2.0, 1e-6, UNIT) < 1e-2
    assert solve_q_gamma_s0(2.0, 1 - 1e-6, UNIT) < 1e-2


def test_q_gamma_monotonicity_bound():
    # (1/2) d/dgamma q^2 <= (1 - gamma) p^2
    for p in (0.5, 2.0, 10.0):
        g = np.linspace(0.02, 0.98, 49)
        q2 = np.array([solve_q_gamma_s0(p, x, UNIT) ** 2 for x in g])
        d = 0.5 * np.gradient(q2, g)
        assert np.all(d <= (1 - g) * p * p * (1 + 1e-6) + 1e-9)


@pytest.mark.parametrize("gamma", [0.0, 1.0, -0.1, 1.5])
def test_q_gamma_domain(gamma):
    with pytest.raises(DomainError):
        solve_q_gamma_s0(1.0, gamma, UNIT)


def test_s1_point_on_surface():
    p = 1.5
    gp = gamma_max_s1(p, UNIT)
    pt = s1_point(p, 0.5 * gp, UNIT)
    assert abs(h1(p, 0.5 * gp, pt.q, UNIT)) <= 1e-10
    assert pt.partner == pytest.approx(float(s1_partner(p, pt.u, UNIT)), rel=1e-9)


def test_s0_partner_limits():
    p = 2.0
    assert s0_partner(p, 1e-9, UNIT) == pytest.approx(p, rel=1e-8)
    u_sym = inverse_energy(0.5 * energy(p, UNIT), UNIT)
    assert s0_partner(p, u_sym, UNIT) == pytest.approx(u_sym, rel=1e-13)


@given(st.floats(0.05, 20.0), st.floats(0.001, 0.999))
def test_s0_partner_round_trip(p, frac):
    u = frac * p
    r = s0_partner(p, u, UNIT)
    assert energy(u, UNIT) + energy(r, UNIT) == pytest.approx(energy(p, UNIT), rel=1e-12)
    assert 0 < r < p
    assert s0_weight(p, u, UNIT) > 0


def test_s0_partner_domain():
    with pytest.raises(DomainError):
        s0_partner(1.0, 1.0, UNIT)


def test_s1_partner_examples():
    s = s1_partner(1.0, 1.0, UNIT)
    assert s == pytest.approx(inverse_energy(2 * math.sqrt(2), UNIT), rel=1e-15)
    assert s < 2.0
    assert s1_partner(1.0, 1e-12, UNIT) == pytest.approx(1.0, rel=1e-10)


@given(st.floats(0.01, 20.0), st.floats(0.001, 20.0))
def test_s1_partner_properties(p, u):
    s = s1_partner(p, u, PhysicalParams())
    assert energy(s, PhysicalParams()) == pytest.approx(energy(p, PhysicalParams()) + energy(u, PhysicalParams()), rel=1e-12)
    assert abs(p - u) * (1 - 1e-12) <= s <= (p + u) * (1 + 1e-12)
    assert s1_weight(p, u, PhysicalParams()) > 0
    assert s2_weight(p, s, PhysicalParams()) > 0


def test_s1_uniform_bound():
    F = lambda a, b: a * np.exp(-a * a)  # noqa: E731
    vals = [p * surface_integral(p, "S1", F, UNIT, u_cap=8.0) for p in np.geomspace(0.1, 50.0, 25)]
    # the L1 norm of u F bounds the sweep uniformly (fitted C0)
    norm = math.sqrt(math.pi) / 4
    assert max(vals) / norm < 1e3
    assert min(vals) > 0


def test_s2_is_shifted_s1():
    F = lambda a, b: np.exp(-a) * (1 + b)  # noqa: E731
    for p in (0.3, 1.0, 3.0):
        cap = 40.0
        s1 = surface_integral(p, "S1", lambda a, b: F(b, a), UNIT, u_cap=cap, panels=256)
        s2 = surface_integral(p, "S2", F, UNIT, u_cap=float(s1_partner(p, cap, UNIT)), panels=256)
        assert s2 == pytest.approx(s1, rel=1e-9)


def test_gamma_max_s1():
    assert gamma_max_s1(1.0, UNIT) == pytest.approx(0.5 / (1 + 2 * math.sqrt(2)), rel=1e-15)
    assert gamma_max_s1(1e6, UNIT) < 1e-12
    p = np.geomspace(0.01, 100.0, 200)
    c0 = np.max(gamma_max_s1(p, UNIT) * p * (1 + p))
    assert np.isfinite(c0) and c0 < 1.0


def test_s0_lower_bound_fit():
    # int K12 F dS with F = |w|^k1 |p - w|^k2 against |p|^(k1+k2+1) min(1,|p|)^(k1+k2+7)
    prm = PhysicalParams()
    ratios = []
    for k1, k2 in ((0, 0), (1, 2), (2, 1)):
        for p in np.geomspace(0.05, 20.0, 20):
            F = lambda a, b: k12(p, a, b, prm) * a**k1 * b**k2  # noqa: E731
            val = surface_integral(p, "S0", F, prm, u_cap=p)
            ratios.append(val / (p ** (k1 + k2 + 1) * min(1.0, p) ** (k1 + k2 + 7)))
    c1 = min(ratios)
    assert c1 > 0 and np.all(np.isfinite(ratios))


def test_surface_unknown_family():
    with pytest.raises(DomainError):
        surface_integral(1.0, "S3", lambda a, b: a, UNIT, u_cap=2.0)
