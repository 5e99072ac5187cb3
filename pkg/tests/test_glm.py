import math

import numpy as np
import pytest
from scipy import integrate, optimize

from rwmhcert.glm import (CumulantCase, CurvatureMarginError, GLMData, GLMDataError, PriorKind,
                          PriorSpec, expfam_posterior, gaussian_prior, glm_constants, load_glm_csv,
                          logistic_bundle, logistic_constants, logistic_preset, logistic_target,
                          poisson_lower_bound, poisson_preset)
from rwmhcert.proposal import gaussian_proposal

X_TOY = np.array([[1.0], [-1.0]])
Y_TOY = np.array([1.0, 0.0])


def toy_unnorm(t):
    # independent transcription of the toy log-posterior
    return t - math.log1p(math.exp(t)) - math.log1p(math.exp(-t)) - 0.5 * t * t


@pytest.fixture(scope="module")
def toy():
    return logistic_bundle(X_TOY, Y_TOY, eta=0.5)


class TestData:
    def test_shapes(self):
        d = GLMData(np.ones((3, 2)), np.arange(3.0))
        assert (d.n, d.p, d.m) == (3, 2, 1)
        np.testing.assert_array_equal(d.y, [0, 1, 2])

    @pytest.mark.parametrize("bad", [np.nan, np.inf])
    def test_non_finite(self, bad):
        with pytest.raises(GLMDataError, match="NaN or Inf"):
            GLMData(np.array([[1.0], [bad]]), np.zeros(2))

    def test_row_mismatch(self):
        with pytest.raises(GLMDataError):
            GLMData(np.ones((3, 1)), np.zeros(2))

    def test_load(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("y,x1,x2\n1,0.5,2\n0,-1,3\n\n")
        d = load_glm_csv(p)
        np.testing.assert_array_equal(d.covariates, [[0.5, 2], [-1, 3]])
        np.testing.assert_array_equal(d.y, [1, 0])

    @pytest.mark.parametrize("text, match", [
        ("", "empty"),
        ("x1,y\n1,2\n", "first column"),
        ("y,x2\n1,2\n", "covariate columns"),
        ("y,x1\n", "no data rows"),
        ("y,x1\n1,2\n1,2,3\n", "line 3"),
        ("y,x1\n1,abc\n", "line 2"),
        ("y,x1\n1,2\n0,nan\n", "line 3: NaN or Inf"),
        ("y,x1\n1,inf\n", "line 2: NaN or Inf"),
    ])
    def test_load_errors(self, tmp_path, text, match):
        p = tmp_path / "d.csv"
        p.write_text(text)
        with pytest.raises(GLMDataError, match=match):
            load_glm_csv(p)


class TestPrior:
    def test_gaussian_prior(self):
        pr = gaussian_prior(2, 4.0)
        assert pr.gamma == 4.0 and pr.lambda2 == 4.0
        np.testing.assert_allclose(pr.g(np.array([1.0, 1.0])), 4.0)
        np.testing.assert_allclose(pr.lipschitz_ratio(2), 4.0, rtol=1e-12)

    def test_dissipative(self):
        pr = PriorSpec(g=lambda t: 0.0, grad_g=lambda t: t, lambda2=1.0, kind="dissipative",
                       a_dag=0.5, b_dag=2.0)
        assert pr.kind is PriorKind.DISSIPATIVE and pr.gamma == 0.5

    @pytest.mark.parametrize("kw", [dict(lambda2=0.0, lambda1=1.0), dict(lambda2=1.0),
                                    dict(lambda2=1.0, kind="dissipative", a_dag=-1.0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            PriorSpec(g=lambda t: 0.0, grad_g=lambda t: t, **kw)


class TestLogisticConstants:
    def test_toy_values(self):
        c = logistic_constants(X_TOY, Y_TOY, 0.5)
        assert (c.C1, c.K1, c.K2, c.K3) == (3.0, 0.0, 3.0, 1.0)
        assert (c.lambda2, c.J_tilde, c.Mp_prime, c.gamma) == (1.5, 2.0, 24.0, 1.0)

    def test_eta_margin(self):
        with pytest.raises(CurvatureMarginError, match="curvature margin"):
            logistic_constants(X_TOY, Y_TOY, 2.0 / 3.0)

    def test_f_xy_bounds_log_density(self, toy):
        bundle, c = toy
        u = np.linspace(0, 20, 81)
        lf = np.array([bundle.logpdf(np.array([v])) for v in u])
        assert np.all(np.abs(lf) <= c.f_xy(u) + abs(bundle.target.log_norm_offset) + 1e-12)

    def test_generic_bounded_gradient(self):
        # logistic as a generic GLM: |grad c| <= |x| and c(0) = 0 after centering
        data = GLMData(X_TOY, Y_TOY)
        c = glm_constants(data, gaussian_prior(1), lambda_data=1.0, K_data=1.0,
                          cumulant_case=CumulantCase.BOUNDED_GRADIENT, grad_c_at_0=np.full(2, 0.5), eta=0.5)
        assert c.C1 == 1.0 * 1.0 + 2 * 1.0 + 0.0
        assert c.K3 == 0.5 and c.J_tilde == 2.0
        assert c.Mp_prime == max((c.C1 + 1.0 + 2.0 + 0.0) / (1 - 0.5), 1.0)

    def test_generic_convex_case(self):
        data = GLMData(X_TOY, Y_TOY)
        c = glm_constants(data, gaussian_prior(1), 1.0, 0.25, "convex_bounded_curvature",
                          np.full(2, 0.5), eta=0.5, c_at_0=np.full(2, math.log(2)))
        np.testing.assert_allclose(c.K1, 2 * math.log(2))
        np.testing.assert_allclose(c.K3, 0.5 * (1 + 2 * 0.25))
        np.testing.assert_allclose(c.J_tilde, 2 * 0.5 + 2 * 0.25)


class TestLogisticTarget:
    def test_mode_matches_scalar_minimizer(self, toy):
        bundle, _ = toy
        ref = optimize.minimize_scalar(lambda t: -toy_unnorm(t), bounds=(-5, 5), method="bounded",
                                       options={"xatol": 1e-12})
        np.testing.assert_allclose(bundle.mode[0], ref.x, atol=1e-7)
        np.testing.assert_allclose(bundle.mode[0], 0.67483, atol=1e-5)

    def test_normalized(self, toy):
        bundle, _ = toy
        z, _ = integrate.quad(lambda t: math.exp(float(bundle.logpdf(np.array([t])))), -40, 40, limit=200)
        np.testing.assert_allclose(z, 1.0, atol=1e-9)
        logZ = math.log(integrate.quad(lambda t: math.exp(toy_unnorm(t)), -40, 40)[0])
        np.testing.assert_allclose(bundle.p_star, math.exp(toy_unnorm(bundle.mode[0]) - logZ), rtol=1e-8)
        np.testing.assert_allclose(bundle.p_star, 0.47542, atol=1e-5)

    def test_laplace_vs_quadrature(self):
        tq, how_q = logistic_target(X_TOY, Y_TOY, normalization="quadrature")
        tl, how_l = logistic_target(X_TOY, Y_TOY, normalization="laplace")
        assert (how_q, how_l) == ("quadrature", "laplace")
        # Laplace is only approximate, but close for this near-Gaussian posterior
        assert abs(tq.log_norm_offset - tl.log_norm_offset) < 0.05

    def test_compiled_kernel_matches(self, toy):
        from rwmhcert.kernels import spec_logpdf_numpy
        bundle, _ = toy
        xs = np.linspace(-6, 6, 25)[:, None]
        np.testing.assert_allclose(spec_logpdf_numpy(bundle.target.kernel, xs), bundle.logpdf(xs),
                                   rtol=1e-12, atol=1e-12)

    def test_non_binary(self):
        with pytest.raises(GLMDataError):
            logistic_target(X_TOY, np.array([1.0, 2.0]))

    @pytest.mark.filterwarnings("ignore:second R_eps term")
    def test_preset(self):
        bundle, c, cert, rep = logistic_preset(X_TOY, Y_TOY, gaussian_proposal(), eta=0.5,
                                               n_mc=10_000, seed=0)
        assert cert.lambda_tilde < 1 and cert.p == 1
        assert rep.upper_t_R > 0 and rep.upper_vacuous == (rep.upper_t_R >= 1)
        for lb in rep.lower_bounds:
            assert 0.0 <= lb.value < 1.0


class TestExpFamily:
    def test_gaussian_location_model(self):
        # T(x)=x, c(t)=t^2/2, prior N(0,1): posterior N(s/(n+1), 1/(n+1))
        xs = np.array([[0.5], [1.5], [1.0]])
        b = expfam_posterior(GLMData(xs, xs), gaussian_prior(1), lambda t: 0.5 * np.sum(t * t, axis=-1),
                             lambda t: np.asarray(t, dtype=float), lambda t: np.eye(1))
        np.testing.assert_allclose(b.mode, [3.0 / 4.0], atol=1e-8)
        np.testing.assert_allclose(b.p_star, math.sqrt(4 / (2 * math.pi)), rtol=1e-8)


class TestPoisson:
    def test_closed_form(self):
        np.testing.assert_allclose(poisson_lower_bound(0.5, 1.0, 1), 1 - 1 / (0.5 * math.sqrt(2 * math.pi)),
                                   rtol=1e-15)
        np.testing.assert_allclose(poisson_lower_bound(0.5, 1.0, 1), 0.2021154, atol=1e-7)

    def test_large_scale_warns(self):
        X = np.array([[1.0], [0.5], [-0.3]])
        y = np.array([2.0, 1.0, 0.0])
        with pytest.warns(UserWarning, match="close to 1"):
            _, lb = poisson_preset(X, y, prop=gaussian_proposal(100.0))
        assert 0.99 < lb < 1

    def test_preset_floor_and_mode(self):
        X = np.array([[1.0], [0.5], [-0.3]])
        y = np.array([2.0, 1.0, 0.0])
        b, lb = poisson_preset(X, y, prop=gaussian_proposal(0.01))
        assert lb == 0.0

        def nll(t):
            eta = X[:, 0] * t
            return -(np.sum(y * eta - np.exp(eta)) - 0.5 * t * t)

        ref = optimize.minimize_scalar(nll, bounds=(-5, 5), method="bounded", options={"xatol": 1e-12})
        np.testing.assert_allclose(b.mode[0], ref.x, atol=1e-7)

    def test_counts_validated(self):
        with pytest.raises(GLMDataError):
            poisson_preset(np.ones((2, 1)), np.array([1.5, 0.0]))
