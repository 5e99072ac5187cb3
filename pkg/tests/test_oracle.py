import math

import numpy as np
import pytest

from rwmhcert.grid import Grid1D, Grid2D, symmetric_grid
from rwmhcert.oracle import (DiscreteKernel, GridTooCoarseError, OracleConvergenceError, default_grid,
                             discretize, reversibility_residual, sandwich_check, spectrum,
                             stationary_and_slem, tv_decay)
from rwmhcert.proposal import gaussian_proposal, laplace_proposal
from rwmhcert.rates import LowerBound, RateReport
from rwmhcert.target import gaussian_bundle, gaussian_mixture_bundle, standard_normal_bundle


@pytest.fixture(scope="module")
def normal_kernel():
    k = discretize(standard_normal_bundle(1), gaussian_proposal(), Grid1D(-8.0, 8.0, 161))
    pi, slem = stationary_and_slem(k)
    return k, pi, slem


def two_cell(a):
    P = np.array([[1 - a, a], [a, 1 - a]])
    return DiscreteKernel(matrix=P, centers=np.array([[0.0], [1.0]]), cell_volume=1.0, log_f=np.zeros(2))


def report(lowers, upper=0.9, vacuous=False):
    return RateReport(upper_t_R=upper, r_star=0.5, A=1.0, alpha_tilde=1.0, upper_vacuous=vacuous,
                      log_upper_t_R=math.log(upper), log_A=0.0, log_alpha_tilde=0.0, lower_bounds=lowers,
                      M_coefficient=1.0, log_M_coefficient=0.0, norm_quality="exact")


class TestDiscretize:
    def test_row_stochastic(self, normal_kernel):
        k, _, _ = normal_kernel
        np.testing.assert_allclose(k.matrix.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(k.matrix >= 0)

    def test_reversible(self, normal_kernel):
        k, pi, _ = normal_kernel
        assert reversibility_residual(k, pi) < 1e-6

    def test_reflection_symmetry(self, normal_kernel):
        k, _, _ = normal_kernel
        np.testing.assert_allclose(k.matrix[::-1, ::-1], k.matrix, atol=1e-15)

    def test_off_diagonal_formula(self, normal_kernel):
        k, _, _ = normal_kernel
        x = k.centers[:, 0]
        i, j = 80, 83
        h = math.exp(-0.5 * x[j] ** 2 + 0.5 * x[i] ** 2)
        q = math.exp(-0.5 * (x[i] - x[j]) ** 2) / math.sqrt(2 * math.pi)
        np.testing.assert_allclose(k.matrix[i, j], min(1.0, h) * q * k.cell_volume, rtol=1e-13)

    def test_too_coarse(self, monkeypatch):
        # a radially decreasing q never overfills a 1-D row, so the guard is driven directly
        from rwmhcert import kernels

        def overfull(centers, *args, **kw):
            n = len(centers)
            P = np.full((n, n), 2.0 / n)
            np.fill_diagonal(P, -1.0)
            return P

        monkeypatch.setattr(kernels, "assemble_kernel_matrix", overfull)
        with pytest.raises(GridTooCoarseError, match="refine grid or shrink extent"):
            discretize(standard_normal_bundle(1), gaussian_proposal(), Grid1D(-8.0, 8.0, 11))

    def test_dim_limit(self):
        b = gaussian_bundle(1.0, 3)
        with pytest.raises(ValueError, match="p <= 2"):
            discretize(b, gaussian_proposal(1.0, 3), Grid1D(-1, 1, 11))

    def test_backends_agree(self):
        b, prop, g = standard_normal_bundle(1), laplace_proposal(), Grid1D(-8.0, 8.0, 81)
        np.testing.assert_allclose(discretize(b, prop, g, use_numba=True).matrix,
                                   discretize(b, prop, g, use_numba=False).matrix, atol=1e-15)

    def test_default_grid(self):
        g = default_grid(gaussian_bundle(4.0), gaussian_proposal())
        assert (g.lo, g.hi, g.n) == (-32.0, 32.0, 161)
        g2 = default_grid(gaussian_mixture_bundle(0.5), gaussian_proposal(1.0, 2))
        assert isinstance(g2, Grid2D) and g2.n_total == 61 * 61


class TestStationary:
    def test_matches_grid_normalized_density(self, normal_kernel):
        k, pi, _ = normal_kernel
        x = k.centers[:, 0]
        w = np.exp(-0.5 * x * x)
        w /= w.sum()
        core = w > 1e-10
        assert np.max(np.abs(pi[core] / w[core] - 1)) < 1e-3

    def test_mass_one(self, normal_kernel):
        _, pi, _ = normal_kernel
        assert abs(pi.sum() - 1) < 1e-12

    def test_slem_value(self, normal_kernel):
        _, _, slem = normal_kernel
        assert 0 <= slem < 1
        np.testing.assert_allclose(slem, 0.7981172, atol=1e-6)

    @pytest.mark.parametrize("a", [0.1, 0.3, 0.5, 0.8])
    def test_two_cell(self, a):
        pi, slem = stationary_and_slem(two_cell(a))
        np.testing.assert_allclose(pi, [0.5, 0.5], atol=1e-14)
        np.testing.assert_allclose(slem, abs(1 - 2 * a), atol=1e-14)

    def test_identity_rejected(self):
        k = DiscreteKernel(matrix=np.eye(3), centers=np.zeros((3, 1)), cell_volume=1.0, log_f=np.zeros(3))
        with pytest.raises(OracleConvergenceError):
            stationary_and_slem(k)

    def test_spectrum_top_is_one(self, normal_kernel):
        k, pi, slem = normal_kernel
        ev = spectrum(k, pi)
        np.testing.assert_allclose(ev[-1], 1.0, atol=1e-10)
        np.testing.assert_allclose(max(abs(ev[0]), abs(ev[-2])), slem, atol=1e-12)

    def test_refinement_stable(self, normal_kernel):
        _, _, slem = normal_kernel
        k2 = discretize(standard_normal_bundle(1), gaussian_proposal(), Grid1D(-8.0, 8.0, 321))
        _, slem2 = stationary_and_slem(k2)
        assert abs(slem2 - slem) < 1e-3

    def test_refinement_stable_laplace(self):
        b, prop = standard_normal_bundle(1), laplace_proposal()
        s1 = stationary_and_slem(discretize(b, prop, Grid1D(-8.0, 8.0, 161)))[1]
        s2 = stationary_and_slem(discretize(b, prop, Grid1D(-8.0, 8.0, 321)))[1]
        assert abs(s2 - s1) < 1e-3

    def test_2d_product(self):
        # for a product target with isotropic Gaussian proposal the chain does not factor,
        # but the SLEM must still sit in [0, 1) and pi must be a distribution
        b = gaussian_bundle(1.0, 2)
        k = discretize(b, gaussian_proposal(1.0, 2), symmetric_grid(2, 6.0, 31))
        pi, slem = stationary_and_slem(k)
        assert abs(pi.sum() - 1) < 1e-12 and 0 < slem < 1
        assert reversibility_residual(k, pi) < 1e-6


class TestTV:
    def test_initial_value(self, normal_kernel):
        k, pi, _ = normal_kernel
        tv = tv_decay(k, 80, 5, pi)
        np.testing.assert_allclose(tv[0], 1 - pi[80], atol=1e-14)

    def test_non_increasing(self, normal_kernel):
        k, pi, _ = normal_kernel
        tv = tv_decay(k, 10, 100, pi)
        assert np.all(np.diff(tv) <= 1e-15)

    def test_slope_matches_slem(self, normal_kernel):
        k, pi, slem = normal_kernel
        tv = tv_decay(k, 40, 100, pi)
        np.testing.assert_allclose(math.log(tv[100] / tv[99]), math.log(slem), atol=1e-2)

    def test_bad_start(self, normal_kernel):
        k, pi, _ = normal_kernel
        with pytest.raises(IndexError):
            tv_decay(k, 161, 3, pi)


class TestSandwich:
    def test_forced_failure(self):
        v = sandwich_check(report([LowerBound("mode", 0.999)], upper=0.9999), 0.9, slack=0.0)
        assert not v.passed
        row = v.rows[0]
        assert row["passed"] is False
        np.testing.assert_allclose(row["margin"], 0.9 - 0.999)

    def test_pass_both_sides(self):
        v = sandwich_check(report([LowerBound("mode", 0.3)], upper=0.95), 0.8)
        assert v.passed and v.upper_checked

    def test_upper_failure(self):
        v = sandwich_check(report([LowerBound("mode", 0.3)], upper=0.5), 0.8)
        assert not v.passed
        assert v.rows[-1]["side"] == "upper"

    def test_vacuous_upper_skipped(self):
        v = sandwich_check(report([LowerBound("mode", 0.3)], upper=1e100, vacuous=True), 0.8)
        assert v.passed and not v.upper_checked
        assert "only the lower half" in v.notes[0]

    def test_vacuous_lower_skipped(self):
        v = sandwich_check(report([LowerBound("bounded_proposal", 0.0, vacuous=True)]), 0.8)
        assert v.rows[0]["passed"] is None

    @pytest.mark.parametrize("slem", [-0.1, 1.0])
    def test_slem_range(self, slem):
        with pytest.raises(ValueError):
            sandwich_check(report([]), slem)

    def test_mode_bound_below_oracle(self, normal_kernel):
        _, _, slem = normal_kernel
        v = sandwich_check(report([LowerBound("mode", 1 - 1 / math.sqrt(2))], vacuous=True), slem)
        assert v.passed
        assert v.rows[0]["margin"] > 0.5
