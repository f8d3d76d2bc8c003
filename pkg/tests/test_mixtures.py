import numpy as np
import pytest
from scipy import stats

from isofit.errors import DegeneratePair, DomainViolation
from isofit.models import (
    GammaMixtureModel,
    GaussianMixtureModel,
    evaluate_signal,
    gamma_mixture_signal,
    gaussian_mixture_signal,
    uniform_grid,
)

CASE1_XI = np.array([1 / 3, 2 / 3, 8 / 3, 4 / 3])
CASE3_XI = np.array([4.0, 0.75, 2.0, 0.25])


class TestGaussianSignal:
    def test_case1_truth_at_t1_vs_normal_pdf_oracle(self):
        # independent evaluation: weight_1*phi(1-1) + weight_2*phi(1-4)
        expected = (1 / 3) * stats.norm.pdf(0.0) + (2 / 3) * stats.norm.pdf(-3.0)
        assert gaussian_mixture_signal(CASE1_XI, 1.0) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(0.135935, abs=5e-7)

    def test_zero_weight_component_contributes_nothing(self):
        xi = np.array([0.0, 1.0, 8 / 3, 4 / 3])
        for t in np.linspace(-3, 8, 23):
            second_only = (2 / 3) * stats.norm.pdf(t - 4.0)
            assert gaussian_mixture_signal(xi, t) == pytest.approx(second_only, abs=1e-15)

    def test_far_tail_vanishes(self):
        assert gaussian_mixture_signal(CASE1_XI, -50.0) < 1e-100

    def test_degenerate_pair(self):
        with pytest.raises(DegeneratePair):
            gaussian_mixture_signal(np.array([0.0, 0.0, 1.0, 1.0]), 0.5)

    def test_non_negative_everywhere(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            xi = rng.uniform(0.01, 8, 4)
            t = rng.uniform(-10, 20)
            assert gaussian_mixture_signal(xi, t) >= 0.0


class TestGammaSignal:
    def test_case3_truth_at_t1_vs_scipy_oracle(self):
        expected = stats.gamma.pdf(1.0, a=4.0, scale=0.75) + stats.gamma.pdf(
            1.0, a=2.0, scale=0.25
        )
        assert gamma_mixture_signal(CASE3_XI, 1.0) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(0.43190, abs=5e-6)

    def test_zero_origin_for_shapes_above_one(self):
        assert gamma_mixture_signal(CASE3_XI, 0.0) == 0.0

    def test_two_unit_exponentials_at_origin(self):
        assert gamma_mixture_signal(np.array([1.0, 1.0, 1.0, 1.0]), 0.0) == pytest.approx(2.0)

    def test_domain_violations(self):
        with pytest.raises(DomainViolation):
            gamma_mixture_signal(CASE3_XI, -0.5)
        with pytest.raises(DomainViolation):
            gamma_mixture_signal(np.array([0.5, 0.75, 2.0, 0.25]), 0.0)
        with pytest.raises(DomainViolation):
            gamma_mixture_signal(np.array([4.0, 0.0, 2.0, 0.25]), 1.0)


class TestVectorizedModels:
    def test_grid_endpoints_included(self):
        grid = uniform_grid(-2.0, 7.0, 50)
        assert grid[0] == -2.0 and grid[-1] == 7.0
        assert np.allclose(np.diff(grid), 9.0 / 49.0)

    @pytest.mark.parametrize(
        "start,stop,n", [(-2.0, 7.0, 50), (-4.0, 15.0, 100)]
    )
    def test_vector_matches_scalar(self, start, stop, n):
        model = GaussianMixtureModel(2 if n == 50 else 4, uniform_grid(start, stop, n))
        rng = np.random.default_rng(9)
        xi = rng.uniform(0.05, 8, model.dimension)
        vec = model.evaluate(xi)
        scalar = np.array([gaussian_mixture_signal(xi, t) for t in model.grid])
        assert np.allclose(vec, scalar, rtol=1e-13)

    def test_gamma_vector_matches_scalar(self):
        model = GammaMixtureModel(uniform_grid(0.0, 10.0, 200))
        vec = model.evaluate(CASE3_XI)
        scalar = np.array([gamma_mixture_signal(CASE3_XI, t) for t in model.grid])
        assert np.allclose(vec, scalar, rtol=1e-12)

    def test_evaluate_is_deterministic(self):
        model = GaussianMixtureModel(2, uniform_grid(-2, 7, 50))
        a = model.evaluate(CASE1_XI)
        b = model.evaluate(CASE1_XI)
        assert np.array_equal(a, b)

    def test_gaussian_mass_equals_weight_sum(self):
        # fine trapezoid over [-20, 30] must integrate to eta_1 + eta_2
        grid = np.linspace(-20.0, 30.0, 20001)
        model = GaussianMixtureModel(2, grid)
        rng = np.random.default_rng(17)
        for _ in range(10):
            xi = rng.uniform(0.05, 8, 4)
            weights = xi[0::2] / (xi[0::2] + xi[1::2])
            mass = np.trapezoid(model.evaluate(xi), grid)
            assert mass == pytest.approx(weights.sum(), abs=1e-6)

    def test_component_permutation_symmetry(self):
        grid = uniform_grid(-4.0, 15.0, 100)
        model = GaussianMixtureModel(4, grid)
        rng = np.random.default_rng(23)
        xi = rng.uniform(0.05, 8, 8)
        swapped = xi.reshape(4, 2)[[2, 0, 3, 1]].reshape(-1)
        assert np.allclose(model.evaluate(xi), model.evaluate(swapped), rtol=1e-13)

    def test_gamma_total_mass_is_two(self):
        # unweighted sum of two densities integrates to 2 (long horizon)
        grid = np.linspace(0.0, 60.0, 60001)
        model = GammaMixtureModel(grid)
        mass = np.trapezoid(model.evaluate(CASE3_XI), grid)
        assert mass == pytest.approx(2.0, abs=2e-5)

    def test_evaluate_signal_grid_override(self):
        model = GaussianMixtureModel(2, uniform_grid(-2, 7, 50))
        grid = np.array([0.0, 1.0])
        out = evaluate_signal(model, CASE1_XI, grid)
        assert out.shape == (2,)
        assert out[1] == pytest.approx(0.135935, abs=5e-7)
