import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from rwmhcert.geometry import (ConeParamError, ConeParams, DegenerateConeError, cone_box_mass,
                               cone_radius, drift_factor, epsilon_delta)
from rwmhcert.proposal import gaussian_proposal, laplace_proposal


def hand_radius(K, ea):
    # independent evaluation: c = cos of the cone half-angle proxy
    c = 1 - ea**2 / 8
    root = math.sqrt(1 - c * c)
    return K * c * root / (1 + root)


class TestConeParams:
    @pytest.mark.parametrize("ea", [0.0, 1 / 3, 0.5, -0.1])
    def test_eps_alpha_bounds(self, ea):
        with pytest.raises(ConeParamError, match="1/3"):
            ConeParams(eps_alpha=ea)

    @pytest.mark.parametrize("K", [0.0, 0.34, 1.0])
    def test_K_bounds(self, K):
        with pytest.raises(ConeParamError, match="K"):
            ConeParams(eps_alpha=0.2, K=K)

    def test_small_alpha_limits_eps_alpha(self):
        p = ConeParams(eps_alpha=0.05, alpha=0.1)
        np.testing.assert_allclose(p.eps_alpha_tilde, math.sqrt(8 - 8 * math.cos(0.1)))
        with pytest.raises(ConeParamError):
            ConeParams(eps_alpha=0.2, alpha=0.1)

    def test_alpha_upper_limit(self):
        with pytest.raises(ConeParamError):
            ConeParams(eps_alpha=0.2, alpha=math.acos(7 / 8))

    def test_default_alpha_gives_tilde_near_one(self):
        assert 0.999 < ConeParams(eps_alpha=0.2).eps_alpha_tilde < 1.0

    @pytest.mark.parametrize("eta, expect", [(0.99, 0.3), (0.2, 0.2), (0.5, 0.3)])
    def test_from_eta(self, eta, expect):
        np.testing.assert_allclose(ConeParams.from_eta(eta).eps_alpha, expect, rtol=1e-8)


class TestConeRadius:
    def test_limit_zero(self):
        assert cone_radius(ConeParams(eps_alpha=1e-8)) < 1e-8

    @pytest.mark.parametrize("ea, val", [(0.2, 0.030117), (0.3, 0.042884)])
    def test_values(self, ea, val):
        r = cone_radius(ConeParams(eps_alpha=ea))
        np.testing.assert_allclose(r, val, atol=1e-6)
        np.testing.assert_allclose(r, hand_radius(1 / 3, ea), rtol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(1e-6, 0.3), st.floats(1e-6, 0.3), st.floats(0.01, 1 / 3))
    def test_in_range_and_increasing(self, a, b, K):
        lo, hi = sorted((a, b))
        r_lo = cone_radius(ConeParams(eps_alpha=lo, K=K))
        r_hi = cone_radius(ConeParams(eps_alpha=hi, K=K))
        assert 0 < r_lo <= r_hi < K


class TestDriftFactor:
    def test_standard_normal(self):
        params = ConeParams(eps_alpha=0.2)
        R = cone_radius(params)
        mass = stats.norm.cdf(1 + R) - stats.norm.cdf(1 - R)
        np.testing.assert_allclose(cone_box_mass(gaussian_proposal(), params), mass, rtol=1e-10)
        np.testing.assert_allclose(mass, 0.01456, atol=2e-5)
        lam = drift_factor(gaussian_proposal(), 1, params)
        np.testing.assert_allclose(lam, 1 - mass / 1.2, rtol=1e-12)
        np.testing.assert_allclose(lam, 0.98787, atol=2e-5)

    def test_full_mass_limit(self):
        params = ConeParams(eps_alpha=0.2)
        np.testing.assert_allclose(drift_factor(gaussian_proposal(), 1, params, box_mass=1.0), 0.2 / 1.2)

    def test_decreasing_in_box_mass(self):
        # the box is centred one unit from the origin; a scale near 1 gives it more mass than 0.3
        params = ConeParams(eps_alpha=0.2)
        m_small = cone_box_mass(gaussian_proposal(0.3), params)
        m_big = cone_box_mass(gaussian_proposal(1.0), params)
        assert m_big > m_small
        assert drift_factor(gaussian_proposal(1.0), 1, params) < drift_factor(gaussian_proposal(0.3), 1, params)

    def test_degenerate(self):
        with pytest.raises(DegenerateConeError, match="degenerate cone volume"):
            drift_factor(gaussian_proposal(), 1, ConeParams(eps_alpha=0.2), box_mass=0.0)
        with pytest.raises(DegenerateConeError):
            drift_factor(gaussian_proposal(0.01), 1, ConeParams(eps_alpha=0.2))

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            drift_factor(gaussian_proposal(1.0, 2), 1, ConeParams(eps_alpha=0.2))

    @pytest.mark.parametrize("p", [2, 3])
    def test_multivariate_box(self, p):
        params = ConeParams(eps_alpha=0.2)
        R = cone_radius(params)
        w = R / math.sqrt(p)
        ref = (stats.norm.cdf(1 + w) - stats.norm.cdf(1 - w)) * (2 * stats.norm.cdf(w) - 1) ** (p - 1)
        np.testing.assert_allclose(cone_box_mass(gaussian_proposal(1.0, p), params), ref, rtol=1e-10)


class TestEpsilonDelta:
    def test_standard_normal_chain(self):
        params = ConeParams(eps_alpha=0.2)
        prop = gaussian_proposal()
        mass = cone_box_mass(prop, params)
        eps, delta, K_eps = epsilon_delta(prop, 1, params)
        np.testing.assert_allclose(eps, 0.2 / 1.2 * mass / 8, rtol=1e-14)
        np.testing.assert_allclose(eps, 3.033e-4, rtol=2e-3)
        np.testing.assert_allclose(K_eps, stats.norm.isf(eps / 2), rtol=1e-9)
        np.testing.assert_allclose(K_eps, 3.612, atol=1e-3)
        np.testing.assert_allclose(delta, eps / (2 * stats.norm.pdf(0) * 2), rtol=1e-12)
        np.testing.assert_allclose(delta, 1.901e-4, rtol=2e-3)

    @pytest.mark.parametrize("prop", [gaussian_proposal(1.0, 2), gaussian_proposal(0.5, 3),
                                      laplace_proposal(1.0, 2)])
    def test_identity(self, prop):
        from rwmhcert._math import unit_ball_volume
        p = prop.dim
        eps, delta, K_eps = epsilon_delta(prop, p, ConeParams(eps_alpha=0.25))
        assert delta > 0
        np.testing.assert_allclose(delta * prop.q0 * unit_ball_volume(p) * K_eps ** (p - 1), eps / 2,
                                   rtol=1e-12)

    def test_eps_override(self):
        params = ConeParams(eps_alpha=0.2)
        eps, _, _ = epsilon_delta(gaussian_proposal(), 1, params, eps=1e-5)
        assert eps == 1e-5
        with pytest.raises(ConeParamError):
            epsilon_delta(gaussian_proposal(), 1, params, eps=1.0)
