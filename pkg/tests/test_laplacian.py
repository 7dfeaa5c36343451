import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_smooth
from warpedg2.errors import NotCoClosed, SingularDenominator
from warpedg2.geometry import SU3Background, TorsionABC, WarpedProfile, compute_abc
from warpedg2.laplacian import (
    SymThreeForm,
    d_star,
    g2_decompose,
    laplacian_g2_decomp,
    laplacian_phi,
    laplacian_phi_profile,
    phi_form,
    star_d,
    star_d_phi,
)
from warpedg2.numerics import Grid, diff


def profile(n, G, h, theta, lam, winding=0.0):
    g = Grid.circle(n)
    r = g.nodes
    return WarpedProfile(g, G(r), h(r), theta(r), SU3Background(lam), winding)


def chi(a, b, c, n=8):
    return SymThreeForm(np.full(n, a, dtype=float), np.full(n, b, dtype=float), np.full(n, c, dtype=float))


class TestDecompose:
    def test_phi(self):
        d = g2_decompose(chi(1, 0, 1))
        assert d.x_coeff[0] == 0 and d.s_rr[0] == 1 and d.s_6[0] == 1 and d.trace_s[0] == 7

    def test_seven_part(self):
        d = g2_decompose(chi(0, 1, 0))
        assert d.x_coeff[0] == 1 and d.s_rr[0] == 0 and d.s_6[0] == 0

    def test_mixed(self):
        d = g2_decompose(chi(2, 0, -1))
        assert (d.s_rr[0], d.s_6[0], d.trace_s[0]) == (-7, 2, 5)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
    def test_trace_identity(self, a, b, c):
        d = g2_decompose(chi(a, b, c, 1))
        assert d.trace_s[0] == pytest.approx(d.s_rr[0] + 6 * d.s_6[0], abs=1e-9 * (1 + abs(a) + abs(c)))
        rr, s6 = d.s_sharp_eigenvalues
        assert rr[0] == d.s_rr[0] and s6[0] == d.s_6[0]

    def test_form_arithmetic(self):
        a, b = chi(1, 2, 3), chi(0.5, 0.5, 0.5)
        assert np.array_equal((a - b + b).as_array(), a.as_array())


class TestStarD:
    def test_phi_matches_closed_form(self):
        p = profile(128, lambda r: 1 + 0.2 * np.sin(r), lambda r: 2 + 0.3 * np.cos(r), lambda r: 0.5 * np.sin(r), 1.0)
        t = compute_abc(p)
        ref = np.stack([t.alpha - 3 * t.beta, -3 * t.gamma / p.G, -4 * t.beta])
        assert np.max(np.abs(star_d_phi(p).as_array() - ref)) < 1e-12

    def test_phi_is_the_generic_path(self):
        p = profile(64, lambda r: 1 + 0.1 * np.cos(r), lambda r: 1.5 + 0 * r, lambda r: r, 1.0, 2 * math.pi)
        assert np.array_equal(star_d_phi(p).as_array(), star_d(phi_form(64), p).as_array())

    def test_flat_constant_form(self):
        p = profile(16, lambda r: 1 + 0 * r, lambda r: 1 + 0 * r, lambda r: 0.3 + 0 * r, 0.0)
        assert np.all(star_d(chi(0.7, -0.2, 1.3, 16), p).as_array() == 0)

    def test_nk_B_only(self):
        p = profile(16, lambda r: 1 + 0 * r, lambda r: 1 + 0 * r, lambda r: 0 * r, 1.0)
        out = star_d(chi(0, 0, 1, 16), p)
        assert np.allclose(out.re1, 0) and np.allclose(out.im1, -3) and np.allclose(out.re2, 0)


class TestDStar:
    def test_flat_phi(self):
        p = profile(16, lambda r: 2 + 0 * r, lambda r: 3 + 0 * r, lambda r: 0 * r, 0.0)
        five, two = d_star(chi(1, 0, 1, 16), p)
        assert np.all(five == 0) and np.all(two == 0)

    def test_twist_term(self):
        p = profile(16, lambda r: 1 + 0 * r, lambda r: 1 + 0 * r, lambda r: 0 * r, 1.0)
        _, two = d_star(chi(1, 0, 0, 16), p)
        assert np.allclose(two, 1)

    def test_linear_B(self):
        g = Grid.interval(16, 0.0, 1.0)
        p = WarpedProfile(g, np.ones(16), np.ones(16), np.zeros(16), SU3Background(0.0))
        five, _ = d_star(SymThreeForm(np.zeros(16), np.zeros(16), g.nodes), p)
        assert np.max(np.abs(five - 0.5)) < 1e-12


class TestLaplacian:
    def test_gamma0_formula(self, rng, circle256):
        r = circle256.nodes
        a, b = random_smooth(rng, r), random_smooth(rng, r)
        G = 1.3 + 0.2 * np.cos(r)
        out = laplacian_phi(TorsionABC(circle256, a, b, np.zeros(256)), G)
        assert np.array_equal(out.re1, a * a - 3.0 * b * a + 12.0 * b * b)
        assert np.array_equal(out.im1, (6.0 * diff(b, circle256) - diff(a, circle256)) / G)
        assert np.array_equal(out.re2, -4.0 * b * (a - 3.0 * b))

    def test_calabi_yau_gamma0(self, circle256):
        r = circle256.nodes
        a = np.cos(r)
        out = laplacian_phi(TorsionABC(circle256, a, np.zeros(256), np.zeros(256)), np.ones(256))
        assert np.array_equal(out.re1, a * a)
        assert np.max(np.abs(out.im1 - np.sin(r))) < 1e-7
        assert np.all(out.re2 == 0)

    def test_calabi_yau_with_gamma(self):
        g = Grid.circle(16)
        out = laplacian_phi(TorsionABC.constant(g, 1, 0, 1), np.ones(16))
        assert np.allclose(out.re1, -8) and np.allclose(out.im1, -6) and np.allclose(out.re2, -8)

    def test_singular_denominator(self):
        g = Grid.circle(16)
        t = TorsionABC(g, np.ones(16), -np.ones(16) + 0.1 * np.sin(g.nodes) * (np.arange(16) != 0), np.full(16, 0.5))
        with pytest.raises(SingularDenominator):
            laplacian_phi(t, np.ones(16))

    @pytest.mark.parametrize("n", [256, 512])
    def test_agrees_with_profile_route(self, n):
        p = profile(
            n,
            lambda r: 1.2 + 0.2 * np.cos(r),
            lambda r: 2.5 + 0.3 * np.sin(r),
            lambda r: 1.0 + 0.4 * np.sin(r),
            1.0,
        )
        assert np.max(np.abs(compute_abc(p).gamma)) > 0.1
        a = laplacian_phi(compute_abc(p), p.G).as_array()
        b = laplacian_phi_profile(p).as_array()
        assert np.max(np.abs(a - b)) < 1e-5 * (512 / n) ** 4

    def test_profile_route_on_calabi_yau(self):
        p = profile(512, lambda r: 1 + 0.1 * np.sin(r), lambda r: 2 + 0.5 * np.cos(r), lambda r: np.sin(r), 0.0)
        a = laplacian_phi(compute_abc(p), p.G).as_array()
        b = laplacian_phi_profile(p).as_array()
        assert np.max(np.abs(a - b)) < 1e-5

    def test_second_order_terms_only_in_seven_part(self, circle256):
        r = circle256.nodes
        a0, b0 = 1.5 + 0.3 * np.cos(r), 0.4 + 0.1 * np.sin(r)
        G = np.ones(256)
        base = laplacian_phi(TorsionABC(circle256, a0, b0, np.zeros(256)), G)
        eps, k = 1e-4, 40
        bump = eps * np.sin(k * r)
        pert = laplacian_phi(TorsionABC(circle256, a0 + bump, b0, np.zeros(256)), G)
        assert np.max(np.abs(pert.re1 - base.re1)) < 10 * eps
        assert np.max(np.abs(pert.re2 - base.re2)) < 10 * eps
        jump = np.max(np.abs(pert.im1 - base.im1))
        assert 0.5 * eps * k < jump < 2 * eps * k


class TestG2Decomp:
    def test_zero(self):
        d = laplacian_g2_decomp(TorsionABC.constant(Grid.circle(8), 0, 0, 0), np.ones(8))
        assert all(np.all(x == 0) for x in (d.x_coeff, d.s_rr, d.s_6, d.trace_s))

    def test_constant_one_one(self):
        # s_rr follows from 3 Re2 - 2 Re1 of the gamma = 0 Laplacian: 3(8) - 2(10) = 4
        d = laplacian_g2_decomp(TorsionABC.constant(Grid.circle(8), 1, 1, 0), np.ones(8))
        assert d.x_coeff[0] == 0 and d.s_rr[0] == 4 and d.s_6[0] == 10

    def test_not_co_closed(self):
        with pytest.raises(NotCoClosed):
            laplacian_g2_decomp(TorsionABC.constant(Grid.circle(8), 1, 1, 0.1), np.ones(8))

    @pytest.mark.parametrize("seed", range(10))
    def test_consistency_with_decompose(self, seed):
        rng = np.random.default_rng(seed)
        g = Grid.circle(128)
        r = g.nodes
        t = TorsionABC(g, random_smooth(rng, r, scale=3), random_smooth(rng, r, scale=3), np.zeros(128))
        G = 1 + 0.5 * np.tanh(random_smooth(rng, r))
        a = laplacian_g2_decomp(t, G)
        b = g2_decompose(laplacian_phi(t, G))
        for x, y in ((a.x_coeff, b.x_coeff), (a.s_rr, b.s_rr), (a.s_6, b.s_6), (a.trace_s, b.trace_s)):
            assert np.max(np.abs(x - y)) <= 1e-12 * max(1.0, np.max(np.abs(y)))


def test_harmonic_co_closed_forces_torsion_free():
    Q = np.array([[1.0, -1.5], [-1.5, 12.0]])
    assert np.all(np.linalg.eigvalsh(Q) > 0)
    rng = np.random.default_rng(5)
    ab = rng.uniform(-1, 1, (10_000, 2)) * np.logspace(-8, 2, 10_000)[:, None]
    re1 = ab[:, 0] ** 2 - 3 * ab[:, 0] * ab[:, 1] + 12 * ab[:, 1] ** 2
    re2 = -4 * ab[:, 1] * (ab[:, 0] - 3 * ab[:, 1])
    small = (np.abs(re1) < 1e-12) & (np.abs(re2) < 1e-12)
    # any point with both components tiny is itself tiny
    assert np.all(np.hypot(ab[small, 0], ab[small, 1]) < 1e-5)
