import numpy as np
import pytest

from isofit.errors import DegeneratePair, DimensionMismatch, DomainViolation
from isofit.reparam import (
    KINDS,
    ReparamMap,
    apply_sort_rule,
    from_unconstrained,
    to_unconstrained,
    validate_parameter_vector,
)


def random_xi(kind, dimension, rng):
    if kind == "shape_scale":
        return rng.uniform(0.05, 10.0, dimension)
    xi = rng.uniform(0.01, 10.0, dimension)
    return xi


class TestSplitRestore:
    def test_weight_sum_paper_truth(self):
        m = ReparamMap("weight_sum", 4)
        eta, nu = m.split(np.array([1 / 3, 2 / 3, 8 / 3, 4 / 3]))
        assert np.allclose(eta, [1 / 3, 2 / 3])
        assert np.allclose(nu, [1.0, 4.0])
        assert np.allclose(m.restore(eta, nu), [1 / 3, 2 / 3, 8 / 3, 4 / 3])

    def test_weight_sum_boundary_weights(self):
        m = ReparamMap("weight_sum", 4)
        xi = m.restore(np.array([0.0, 1.0]), np.array([1.0, 1.0]))
        assert np.allclose(xi, [0.0, 1.0, 1.0, 0.0])

    def test_shape_scale_pairing(self):
        m = ReparamMap("shape_scale", 4)
        eta, nu = m.split(np.array([4.0, 0.75, 2.0, 0.25]))
        assert np.allclose(eta, [0.75, 0.25])
        assert np.allclose(nu, [4.0, 2.0])

    def test_chroma_ratio_sum_example(self):
        m = ReparamMap("chroma_ratio_sum", 4)
        eta, nu = m.split(np.array([2.0, 1.0, 0.1, 0.05]))
        # a-ratio, b-ratio and a-sum, b-sum
        assert np.allclose(eta, [2 / 3, 2 / 3])
        assert np.allclose(nu, [3.0, 0.15])
        assert np.allclose(m.restore(np.array([2 / 3, 2 / 3]), np.array([3.0, 0.15])),
                           [2.0, 1.0, 0.1, 0.05])

    @pytest.mark.parametrize("kind", KINDS)
    @pytest.mark.parametrize("dimension", [4, 8])
    def test_round_trip_1000_random(self, kind, dimension):
        m = ReparamMap(kind, dimension)
        rng = np.random.default_rng(11)
        worst = 0.0
        for _ in range(1000):
            xi = random_xi(kind, dimension, rng)
            eta, nu = m.split(xi)
            back = m.restore(eta, nu)
            worst = max(worst, np.max(np.abs(back - xi)))
        assert worst < 1e-12

    @pytest.mark.parametrize("kind", KINDS)
    def test_split_of_restore_identity(self, kind):
        m = ReparamMap(kind, 4)
        rng = np.random.default_rng(12)
        for _ in range(200):
            eta = rng.uniform(0.01, 0.99, 2)
            nu = rng.uniform(0.1, 9.0, 2)
            eta2, nu2 = m.split(m.restore(eta, nu))
            assert np.allclose(eta2, eta, atol=1e-12)
            assert np.allclose(nu2, nu, atol=1e-12)

    def test_degenerate_pair_rejected(self):
        m = ReparamMap("weight_sum", 4)
        with pytest.raises(DegeneratePair):
            m.split(np.array([0.0, 0.0, 1.0, 1.0]))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            ReparamMap("weight_sum", 4).split(np.ones(6))
        with pytest.raises(DimensionMismatch):
            ReparamMap("weight_sum", 5)

    def test_ratio_domain_enforced(self):
        m = ReparamMap("weight_sum", 4)
        with pytest.raises(DomainViolation):
            m.restore(np.array([1.2, 0.5]), np.array([1.0, 1.0]))


class TestSortRule:
    def test_sort_ascending_permutes_pairs(self):
        eta, nu = apply_sort_rule("sort_ascending", [0.9, 0.1], [4.0, 1.0])
        assert np.allclose(eta, [0.1, 0.9])
        assert np.allclose(nu, [1.0, 4.0])

    def test_already_sorted_unchanged(self):
        eta, nu = apply_sort_rule("sort_ascending", [0.1, 0.9], [1.0, 4.0])
        assert np.allclose(eta, [0.1, 0.9])
        assert np.allclose(nu, [1.0, 4.0])

    def test_none_rule_is_identity(self):
        eta, nu = apply_sort_rule("none", [0.9, 0.1], [4.0, 1.0])
        assert np.allclose(eta, [0.9, 0.1])
        assert np.allclose(nu, [4.0, 1.0])

    def test_idempotent_and_pair_preserving(self):
        rng = np.random.default_rng(5)
        for rule in ("sort_ascending", "swap_smaller_first"):
            for _ in range(200):
                eta = rng.uniform(0, 1, 4)
                nu = rng.uniform(0, 9, 4)
                e1, n1 = apply_sort_rule(rule, eta, nu)
                e2, n2 = apply_sort_rule(rule, e1, n1)
                assert np.array_equal(e1, e2) and np.array_equal(n1, n2)
                pairs_in = sorted(zip(eta.tolist(), nu.tolist()))
                pairs_out = sorted(zip(e1.tolist(), n1.tolist()))
                assert pairs_in == pairs_out


class TestUnconstrainedTransform:
    def test_center_values(self):
        eta, nu = from_unconstrained(np.zeros(2), np.zeros(2))
        assert np.allclose(eta, 0.5)
        assert np.allclose(nu, 1.0)

    def test_closed_form_inverse(self):
        eta_t, nu_t = to_unconstrained(np.array([0.5, 0.5]), np.array([3.0, 0.15]))
        assert np.allclose(eta_t, 0.0)
        assert np.allclose(nu_t, [np.log(3.0), np.log(0.15)])

    def test_round_trip_over_range(self):
        rng = np.random.default_rng(21)
        eta = rng.uniform(0.001, 0.999, 500)
        nu = 10.0 ** rng.uniform(-6, 6, 500)
        eta_t, nu_t = to_unconstrained(eta, nu)
        eta2, nu2 = from_unconstrained(eta_t, nu_t)
        assert np.max(np.abs(eta2 - eta)) < 1e-12
        assert np.max(np.abs(nu2 - nu) / nu) < 1e-12

    def test_strictly_monotone(self):
        x = np.linspace(-5, 5, 201)
        eta, nu = from_unconstrained(x, x)
        assert np.all(np.diff(eta) > 0)
        assert np.all(np.diff(nu) > 0)

    def test_boundary_rejected(self):
        with pytest.raises(DomainViolation):
            to_unconstrained(np.array([0.0]), np.array([1.0]))
        with pytest.raises(DomainViolation):
            to_unconstrained(np.array([0.5]), np.array([0.0]))


def test_validate_parameter_vector():
    assert validate_parameter_vector([1.0, 2.0], 2).shape == (2,)
    with pytest.raises(DomainViolation):
        validate_parameter_vector([1.0, -0.1])
    with pytest.raises(DomainViolation):
        validate_parameter_vector([np.inf, 1.0])
    with pytest.raises(DimensionMismatch):
        validate_parameter_vector([1.0], 2)
