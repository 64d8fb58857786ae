import numpy as np
import pytest

from n2i.noise import NoiseModel
from n2i.recon import sub_reconstruct
from n2i.theory import (analytic_noise_variance, make_fixed_map,
                        make_tiny_problem, prop1_check, zero_mean_check)


@pytest.fixture(scope="module")
def problem():
    return make_tiny_problem(image_size=16, n_angles=32, detector_count=24,
                             sigma=0.5, n_phantoms=4, n_bubbles=6, seed=0)


class TestTinyProblem:
    def test_matrices_reproduce_sub_reconstruction(self, problem):
        geom = problem.geometry
        sino = problem.clean_sinograms[0]
        for j in (1, 2):
            direct = sub_reconstruct(sino, geom, 2, j)
            via_mat = (problem.recon_mats[j - 1] @ sino.ravel()).reshape(
                geom.image_shape()
            )
            assert np.allclose(direct, via_mat, atol=1e-10)

    def test_refuses_large_instances(self):
        with pytest.raises(ValueError):
            make_tiny_problem(image_size=64)

    def test_fixed_maps(self, rng):
        x = rng.standard_normal((3, 16))
        assert np.array_equal(make_fixed_map("zero", 16)(x), np.zeros_like(x))
        assert np.array_equal(make_fixed_map("identity", 16)(x), x)
        lin = make_fixed_map("random-linear", 16, seed=1)
        assert np.allclose(lin(2 * x), 2 * lin(x))
        with pytest.raises(ValueError):
            make_fixed_map("cubic", 16)


class TestProp1Check:
    def test_noiseless_case_collapses(self, problem):
        h = make_fixed_map("zero", problem.geometry.image_size**2)
        rep = prop1_check(problem, h, 500, seed=1, sigma=0.0)
        assert rep.term_noise_var == 0.0
        assert rep.residual == pytest.approx(0.0, abs=1e-12)
        assert rep.lhs == pytest.approx(rep.term_supervised, rel=1e-12)

    def test_decomposition_holds_zero_map(self, problem):
        h = make_fixed_map("zero", problem.geometry.image_size**2)
        rep = prop1_check(problem, h, 2000, seed=2)
        assert rep.holds(n_se=4.0)

    def test_standard_error_scales_with_samples(self, problem):
        h = make_fixed_map("identity", problem.geometry.image_size**2)
        se1 = prop1_check(problem, h, 2000, seed=3).lhs_se
        se2 = prop1_check(problem, h, 4000, seed=3).lhs_se
        assert se2 / se1 == pytest.approx(1 / np.sqrt(2), rel=0.2)

    def test_minimum_samples_enforced(self, problem):
        h = make_fixed_map("zero", problem.geometry.image_size**2)
        with pytest.raises(ValueError):
            prop1_check(problem, h, 99)

    def test_report_rows(self, problem):
        h = make_fixed_map("zero", problem.geometry.image_size**2)
        rep = prop1_check(problem, h, 200, seed=0)
        terms = [r[0] for r in rep.rows()]
        assert terms == ["lhs", "term_supervised", "term_noise_var",
                         "residual"]

    def test_analytic_variance_cross_check(self, problem):
        h = make_fixed_map("identity", problem.geometry.image_size**2)
        rep = prop1_check(problem, h, 4000, seed=5)
        exact = analytic_noise_variance(problem)
        assert abs(rep.term_noise_var - exact) < 4 * rep.term_noise_var_se


class TestZeroMeanCheck:
    def test_gaussian_low_exceedance(self, rng):
        sino = rng.uniform(0.5, 2.0, (8, 12))
        model = NoiseModel(kind="gaussian", sigma=0.3)
        summary = zero_mean_check(model, sino, 2000, seed=0)
        assert summary.exceedance_fraction < 0.01

    def test_low_flux_poisson_bias_detected(self, rng):
        sino = rng.uniform(2.0, 4.0, (8, 12))  # high absorption
        model = NoiseModel(kind="poisson", photon_count=10.0)
        summary = zero_mean_check(model, sino, 2000, seed=0)
        assert abs(summary.mean_bias) > 4 * summary.mean_bias_se

    def test_bias_shrinks_with_photon_count(self, rng):
        sino = rng.uniform(0.5, 2.0, (8, 12))
        low = zero_mean_check(NoiseModel(kind="poisson", photon_count=1e2),
                              sino, 3000, seed=1)
        high = zero_mean_check(NoiseModel(kind="poisson", photon_count=1e4),
                               sino, 3000, seed=1)
        assert high.mean_abs_bias < low.mean_abs_bias

    def test_minimum_samples_enforced(self, rng):
        model = NoiseModel(kind="gaussian", sigma=0.1)
        with pytest.raises(ValueError):
            zero_mean_check(model, rng.uniform(1, 2, (4, 4)), 50)
