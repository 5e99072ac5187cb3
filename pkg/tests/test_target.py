import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from rwmhcert.target import (ETA_CLAMP, CurvatureCert, EnvelopeFn, LogTarget, ModeNotFoundError,
                             NonFiniteDensityError, NormQuality, SuperexpCert, check_envelope,
                             check_gradient, combine_mixture, combine_product, default_radii,
                             find_mode, gaussian_bundle, gaussian_mixture_bundle, gaussian_target,
                             make_bundle, standard_normal_bundle, verify_assumptions)


def cauchy_bundle():
    # density 1/(pi (1 + x^2)) declared with the (wrong) linear rate f_s(u) = u
    t = LogTarget(dim=1, log_density=lambda x: -math.log(math.pi) - np.log1p(x[..., 0] ** 2),
                  grad_log_density=lambda x: -2 * x / (1 + x * x))
    return make_bundle(t, None, SuperexpCert.linear(1.0), None, mode=np.zeros(1), name="cauchy")


class TestLogTarget:
    def test_invalid_dim(self):
        with pytest.raises(ValueError):
            LogTarget(dim=0, log_density=None, grad_log_density=None)

    def test_from_unnormalized(self):
        t = LogTarget.from_unnormalized(1, lambda x: -0.5 * x[..., 0] ** 2, lambda x: -x,
                                        -0.5 * math.log(2 * math.pi))
        np.testing.assert_allclose(t.logpdf([1.3]), stats.norm.logpdf(1.3), rtol=1e-14)
        assert t.norm_quality is NormQuality.APPROXIMATE

    @pytest.mark.parametrize("dim", [1, 2, 4])
    def test_gaussian_gradient(self, dim, rng):
        t = gaussian_target(0.7, dim, mean=np.arange(dim) * 0.3)
        assert check_gradient(t, rng.normal(size=(20, dim)) * 2) < 1e-5
        x = rng.normal(size=dim)
        ref = stats.multivariate_normal(np.arange(dim) * 0.3, 0.49 * np.eye(dim)).logpdf(x)
        np.testing.assert_allclose(t.logpdf(x), ref, rtol=1e-13)

    def test_mixture_gradient(self, rng):
        b = gaussian_mixture_bundle(0.5)
        assert check_gradient(b.target, rng.normal(size=(20, 2)) * 2) < 1e-5


class TestSuperexpCert:
    def test_linear_inverse(self):
        s = SuperexpCert.linear(2.0, C1=1.0)
        for u in np.linspace(0, 50, 11):
            np.testing.assert_allclose(s.inverse(float(s.f_s(u))), u, atol=1e-10)

    def test_below_range_is_domain_infimum(self):
        assert SuperexpCert.linear(3.0).inverse(-7.0) == 0.0
        s = SuperexpCert(f_s=lambda u: u**2 + 1.0)
        assert s.inverse(0.5) == 0.0

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.0, 100.0))
    def test_generic_inverse_left_inverse(self, u):
        s = SuperexpCert(f_s=lambda v: v**3 + v)
        np.testing.assert_allclose(s.inverse(u**3 + u), u, atol=1e-10)

    def test_invalid(self):
        with pytest.raises(ValueError):
            SuperexpCert.linear(0.0)
        with pytest.raises(ValueError):
            SuperexpCert(f_s=lambda u: u, M_s=-1.0)


class TestCurvatureCert:
    @pytest.mark.parametrize("eta", [0.0, 1.0, 1.5, -0.1])
    def test_eta_range(self, eta):
        with pytest.raises(ValueError):
            CurvatureCert(eta=eta)

    def test_clamp_warns(self):
        with pytest.warns(UserWarning, match="clamped"):
            c = CurvatureCert.clamped(1.0)
        assert c.eta == ETA_CLAMP == 1 - 1e-6


class TestEnvelope:
    def test_nondecreasing(self):
        assert EnvelopeFn(lambda r: r * r).is_nondecreasing(np.linspace(0, 5, 50))
        assert not EnvelopeFn(lambda r: math.sin(r)).is_nondecreasing(np.linspace(0, 5, 50))

    def test_standard_normal_envelope(self):
        b = standard_normal_bundle(1)
        worst, _ = check_envelope(b, n=1000, max_radius=10.0, seed=0)
        assert worst <= 0
        np.testing.assert_allclose(b.envelope(2.0), 2.0 + 0.5 * math.log(2 * math.pi))


class TestFindMode:
    def test_standard_normal(self):
        mode, p_star = find_mode(gaussian_target(), np.array([3.0]))
        np.testing.assert_allclose(mode, [0.0], atol=1e-10)
        np.testing.assert_allclose(p_star, 0.398942, atol=1e-6)

    def test_deterministic(self):
        b = gaussian_mixture_bundle(0.5)
        m1, p1 = find_mode(b.target, np.array([0.4, -0.2]))
        m2, p2 = find_mode(b.target, np.array([0.4, -0.2]))
        np.testing.assert_array_equal(m1, m2)
        assert p1 == p2

    def test_gradient_path_without_hessian(self):
        t = LogTarget(dim=1, log_density=lambda x: -np.cosh(x[..., 0] - 1.5),
                      grad_log_density=lambda x: -np.sinh(x - 1.5))
        mode, _ = find_mode(t, np.array([-2.0]))
        np.testing.assert_allclose(mode, [1.5], atol=1e-7)

    def test_nonconvergence_carries_iterate(self):
        t = LogTarget(dim=1, log_density=lambda x: x[..., 0], grad_log_density=lambda x: np.ones_like(x))
        with pytest.raises(ModeNotFoundError) as ei:
            find_mode(t, np.array([0.0]), max_iter=5)
        assert ei.value.last_iterate is not None

    def test_nonfinite(self):
        t = LogTarget(dim=1, log_density=lambda x: np.full(x.shape[:-1], np.nan),
                      grad_log_density=lambda x: np.zeros_like(x))
        with pytest.raises(NonFiniteDensityError):
            find_mode(t, np.array([0.0]))


class TestBundles:
    def test_gaussian_bundle_fields(self):
        b = gaussian_bundle(2.0, 1)
        np.testing.assert_allclose(b.p_star, stats.norm.pdf(0, scale=2.0), rtol=1e-12)
        np.testing.assert_allclose(b.p_star, math.exp(float(b.logpdf(b.mode))), rtol=1e-8)
        assert b.superexp.slope == 0.25 and b.M_star == 0.0
        assert b.norm_quality is NormQuality.EXACT

    def test_mode_gradient_small(self):
        b = gaussian_mixture_bundle(0.5)
        assert np.linalg.norm(b.target.grad(b.mode)) < 1e-6

    def test_product_of_standard_normals(self, rng):
        n = standard_normal_bundle(1)
        b = combine_product(n, n)
        assert b.superexp.slope == 2.0 and b.superexp.C1 == 0.0
        xs = rng.normal(size=(50, 1)) * 3
        np.testing.assert_array_equal(b.logpdf(xs), 2 * n.logpdf(xs))
        np.testing.assert_allclose(b.envelope(1.7), 1.7**2 + math.log(2 * math.pi))
        assert b.norm_quality is NormQuality.APPROXIMATE
        assert combine_product(n, n, normalized=True).norm_quality is NormQuality.EXACT
        # the product is not normalized, so |log f| <= f_tilde is checked pointwise on the sum
        r = np.linalg.norm(xs, axis=1)
        assert np.all(np.abs(b.logpdf(xs)) <= b.envelope(r) + 1e-12)

    def test_product_eta_min(self):
        b1 = gaussian_bundle(1.0, 1, eta=0.4)
        b2 = gaussian_bundle(1.0, 1, eta=0.7)
        assert combine_product(b1, b2).curvature.eta == 0.4
        assert combine_mixture(b1, b2, 0.5, 0.5).curvature.eta == 0.4

    def test_product_dim_mismatch(self):
        with pytest.raises(ValueError):
            combine_product(standard_normal_bundle(1), standard_normal_bundle(2))

    def test_mixture_rules(self):
        b1 = gaussian_bundle(1.0, 1)
        b2 = gaussian_bundle(1.0 / math.sqrt(2.0), 1)
        b2 = b2.__class__(**{**b2.__dict__, "superexp": SuperexpCert.linear(2.0, C1=3.0)})
        m = combine_mixture(b1, b2, 0.3, 0.7)
        assert m.superexp.slope == 1.0 and m.superexp.C1 == 3.0
        assert m.M_star == max(b1.M_star, b2.M_star)

    def test_mixture_density(self, rng):
        b1, b2 = gaussian_bundle(1.0, 1), gaussian_bundle(2.0, 1)
        m = combine_mixture(b1, b2, 0.3, 0.7)
        xs = rng.normal(size=(100, 1)) * 3
        ref = 0.3 * stats.norm.pdf(xs[:, 0]) + 0.7 * stats.norm.pdf(xs[:, 0], scale=2.0)
        np.testing.assert_allclose(np.exp(m.logpdf(xs)), ref, rtol=1e-12)

    def test_degenerate_mixture(self, rng):
        b1, b2 = gaussian_bundle(1.0, 1), gaussian_bundle(2.0, 1)
        m = combine_mixture(b1, b2, 1.0, 0.0)
        xs = rng.normal(size=(20, 1))
        np.testing.assert_allclose(m.logpdf(xs), b1.logpdf(xs), rtol=1e-14)

    @pytest.mark.parametrize("w", [(0.5, 0.6), (-0.1, 1.1), (0.5, 0.5 + 1e-10)])
    def test_mixture_weights(self, w):
        with pytest.raises(ValueError):
            combine_mixture(standard_normal_bundle(1), standard_normal_bundle(1), *w)


class TestGaussianMixtureBundle:
    def test_half(self):
        b = gaussian_mixture_bundle(0.5)
        assert b.superexp.slope == 1.0 and b.superexp.C1 == 0.0
        assert b.curvature.eta == 0.5 and b.M_star == 0.0
        k = math.sqrt(0.5) / math.pi
        for z in (0.0, 0.5, 2.0):
            np.testing.assert_allclose(b.envelope(z), math.log(math.exp(2 * z * z + 2 * k) + 1), rtol=1e-14)

    def test_a_one_single_gaussian(self, rng):
        with pytest.warns(UserWarning, match="clamped"):
            b = gaussian_mixture_bundle(1.0)
        xs = rng.normal(size=(20, 2))
        np.testing.assert_allclose(b.logpdf(xs), -math.log(math.pi) - np.sum(xs**2, axis=1), rtol=1e-13)
        np.testing.assert_allclose(b.mode, [0.0, 0.0], atol=1e-10)

    def test_a_four_clamped(self):
        with pytest.warns(UserWarning, match="clamped"):
            b = gaussian_mixture_bundle(4.0)
        assert b.curvature.eta == 1 - 1e-6

    def test_invalid(self):
        with pytest.raises(ValueError):
            gaussian_mixture_bundle(0.0)
        with pytest.raises(ValueError):
            gaussian_mixture_bundle(0.5, envelope_constant="other")

    def test_published_envelope_fails_near_origin(self):
        # |log f(0)| = |log(sqrt(a)/pi)| exceeds log(exp(2 sqrt(a)/pi) + 1) for a = 0.5
        b = gaussian_mixture_bundle(0.5)
        assert abs(float(b.logpdf(np.zeros(2)))) > float(b.envelope(0.0))

    @pytest.mark.parametrize("a", [0.1, 0.5, 2.0, 10.0])
    def test_sound_envelope_holds(self, a):
        ctx = pytest.warns(UserWarning, match="clamped") if a >= 1 else warnings.catch_warnings()
        with ctx:
            b = gaussian_mixture_bundle(a, envelope_constant="sound")
        worst, _ = check_envelope(b, n=1000, max_radius=10.0, seed=1)
        assert worst <= 1e-12


class TestVerifyAssumptions:
    def test_default_radii(self):
        assert default_radii(0.0) == [1.1, 1.5, 2.0, 4.0, 8.0]
        np.testing.assert_allclose(default_radii(3.0), [3.3, 4.5, 6.0, 12.0, 24.0])

    @pytest.mark.parametrize("dim", [1, 3])
    def test_standard_normal_passes(self, dim):
        r = verify_assumptions(standard_normal_bundle(dim), n_directions=16, seed=0)
        assert r.passed
        assert r.checks["superexp"].n_checked > 0

    def test_cauchy_flags_rate(self):
        r = verify_assumptions(cauchy_bundle(), radii=[0.5, 1.0, 2.0, 10.0], n_directions=4, seed=0,
                               check_log_concavity=False)
        assert not r.checks["superexp"].passed
        # inequality -2r/(1+r^2) <= -r holds only for r <= 1
        failed = r.failed_radii("superexp")
        assert failed == [2.0, 10.0]
        margin = -20 / 101 + 10
        np.testing.assert_allclose(r.checks["superexp"].worst_margin, margin, rtol=1e-12)

    def test_mixture_log_concavity_fails_between_modes(self):
        # on the diagonal x = (t, t) the Hessian of log f has eigenvalue t^2/2 - 3/2
        # along (1, -1), positive once |x| > sqrt(6)
        b = gaussian_mixture_bundle(0.5)
        r = verify_assumptions(b, radii=[2.0, 3.0], n_directions=1, seed=0)
        lc = r.checks["log_concavity"]
        assert not lc.passed
        assert {round(f["radius"], 12) for f in lc.failures} == {3.0}
        pts = np.array([f["point"] for f in lc.failures])
        np.testing.assert_allclose(np.abs(pts[:, 0]), np.abs(pts[:, 1]), rtol=0.1)
        wp = np.abs(lc.worst_point)
        np.testing.assert_allclose(wp[0], wp[1], rtol=1e-12)
        t = 3.0 / math.sqrt(2.0)
        np.testing.assert_allclose(lc.worst_margin, t * t / 2 - 1.5, rtol=1e-4)

    def test_report_dict(self):
        d = verify_assumptions(standard_normal_bundle(1), n_directions=2).to_dict()
        assert d["passed"] and "evidence" in d["note"]

    def test_bad_directions(self):
        with pytest.raises(ValueError):
            verify_assumptions(standard_normal_bundle(1), n_directions=0)
