"""Metric operations over finite hypothesis classes."""

import numpy as np
import pytest

from app.models.hypothesis import HypothesisClass, InstanceError, Marginal
from app.services.hypothesis_service import hypothesis_service
from app.services.instance_service import instance_service


class TestDistance:

    def test_threshold_pair(self, thresholds10):
        d = hypothesis_service.distance(thresholds10.hclass, thresholds10.marginal, 2, 5)
        assert d == pytest.approx(0.3)

    def test_opposite_thresholds(self):
        instance = instance_service.gen_thresholds(4)
        assert hypothesis_service.distance(instance.hclass, instance.marginal, 0, 4) == 1.0

    def test_self_distance_is_zero(self, thresholds10):
        for h in range(thresholds10.hclass.n_hypotheses):
            assert hypothesis_service.distance(thresholds10.hclass, thresholds10.marginal, h, h) == 0.0

    def test_matrix_matches_pairwise(self, thresholds10):
        table = hypothesis_service.distance_matrix(thresholds10.hclass, thresholds10.marginal)
        np.testing.assert_allclose(table, table.T)
        np.testing.assert_array_equal(np.diag(table), 0.0)
        assert table[2, 5] == pytest.approx(0.3)

    def test_matrix_over_selected_rows(self, thresholds10):
        table = hypothesis_service.distance_matrix(thresholds10.hclass, thresholds10.marginal, [0, 5, 10])
        assert table.shape == (3, 3)
        assert table[0, 2] == pytest.approx(1.0)

    def test_zero_mass_points_do_not_count(self):
        hclass = HypothesisClass(np.array([[0, 0], [1, 0]]))
        marginal = Marginal(np.array([0.0, 1.0]))
        assert hypothesis_service.distance(hclass, marginal, 0, 1) == 0.0

    def test_index_out_of_range(self, thresholds10):
        with pytest.raises(InstanceError):
            hypothesis_service.distance(thresholds10.hclass, thresholds10.marginal, 0, 11)

    def test_marginal_size_mismatch(self, thresholds10):
        with pytest.raises(InstanceError):
            hypothesis_service.distance(thresholds10.hclass, Marginal.uniform(9), 0, 1)


class TestBallMass:

    def test_single_hypothesis(self):
        hclass = HypothesisClass(np.array([[1, 0, 1]]))
        assert hypothesis_service.ball_mass(hclass, Marginal.uniform(3), [1.0], 0, 0.0) == 1.0

    def test_only_center_inside(self, figure1):
        instance = figure1.instance
        mass = hypothesis_service.ball_mass(instance.hclass, instance.marginal, [0.9, 0.0999, 0.0001], 0, 0.1)
        assert mass == pytest.approx(0.9)

    def test_radius_covering_class(self, figure1):
        instance = figure1.instance
        mass = hypothesis_service.ball_mass(instance.hclass, instance.marginal, [0.9, 0.0999, 0.0001], 2, 1.0)
        assert mass == pytest.approx(1.0)

    def test_closed_ball_includes_boundary(self, thresholds10):
        weights = np.full(11, 1 / 11)
        mass = hypothesis_service.ball_mass(thresholds10.hclass, thresholds10.marginal, weights, 5, 0.1)
        assert mass == pytest.approx(3 / 11)

    def test_monotone_in_radius(self, thresholds10, rng):
        weights = rng.dirichlet(np.ones(11))
        masses = [
            hypothesis_service.ball_mass(thresholds10.hclass, thresholds10.marginal, weights, 4, radius)
            for radius in np.linspace(0, 1, 21)
        ]
        assert all(a <= b + 1e-15 for a, b in zip(masses, masses[1:]))

    def test_negative_radius(self, thresholds10):
        with pytest.raises(InstanceError):
            hypothesis_service.ball_mass(thresholds10.hclass, thresholds10.marginal, np.full(11, 1 / 11), 0, -0.1)

    def test_weights_must_be_distribution(self, thresholds10):
        with pytest.raises(InstanceError):
            hypothesis_service.ball_mass(thresholds10.hclass, thresholds10.marginal, np.ones(11), 0, 0.1)


class TestHeaviestBall:

    def test_figure1_prior(self, figure1):
        instance = figure1.instance
        center, mass = hypothesis_service.heaviest_ball(
            instance.hclass, instance.marginal, [0.9, 0.099999, 1e-6], 0.1,
        )
        assert center == 0
        assert mass == pytest.approx(0.9)

    def test_tie_goes_to_lowest_index(self):
        hclass = HypothesisClass(np.array([[0, 0], [1, 1]]))
        center, mass = hypothesis_service.heaviest_ball(hclass, Marginal.uniform(2), [0.5, 0.5], 0.4)
        assert center == 0
        assert mass == pytest.approx(0.5)

    def test_overlapping_balls(self):
        instance = instance_service.gen_thresholds(4)
        center, mass = hypothesis_service.heaviest_ball(instance.hclass, instance.marginal, np.full(5, 0.2), 0.25)
        assert center == 1
        assert mass == pytest.approx(0.6)

    def test_centers_restricted_to_support(self):
        hclass = HypothesisClass(np.array([[0, 0], [0, 1], [1, 1]]))
        center, _ = hypothesis_service.heaviest_ball(hclass, Marginal.uniform(2), [0.5, 0.0, 0.5], 0.5)
        assert center == 0


class TestPacking:

    def test_threshold_packing(self, thresholds10):
        packing = hypothesis_service.greedy_maximal_packing(thresholds10.hclass, thresholds10.marginal, 0.2)
        assert packing.members == (0, 3, 6, 9)

    def test_zero_radius_drops_duplicates(self):
        hclass = HypothesisClass(np.array([[0, 1], [0, 1], [1, 1]]))
        packing = hypothesis_service.greedy_maximal_packing(hclass, Marginal.uniform(2), 0.0)
        assert packing.members == (0, 2)

    def test_members_pairwise_separated(self):
        instance = instance_service.gen_random(15, 10, 0.5, seed=7)
        radius = 0.2
        packing = hypothesis_service.greedy_maximal_packing(instance.hclass, instance.marginal, radius)
        table = hypothesis_service.distance_matrix(instance.hclass, instance.marginal, packing.members)
        off_diagonal = table[~np.eye(len(packing), dtype=bool)]
        assert np.all(off_diagonal > radius)

    def test_maximal_packing_covers(self):
        instance = instance_service.gen_random(15, 10, 0.5, seed=7)
        radius = 0.2
        packing = hypothesis_service.greedy_maximal_packing(instance.hclass, instance.marginal, radius)
        table = hypothesis_service.distance_matrix(instance.hclass, instance.marginal)
        nearest = table[:, list(packing.members)].min(axis=1)
        assert np.all(nearest <= radius)

    def test_position_lookup(self, thresholds10):
        packing = hypothesis_service.greedy_maximal_packing(thresholds10.hclass, thresholds10.marginal, 0.2)
        assert packing.position(6) == 2
        with pytest.raises(InstanceError):
            packing.position(1)

    def test_packing_distances_shape(self, thresholds10):
        packing = hypothesis_service.greedy_maximal_packing(thresholds10.hclass, thresholds10.marginal, 0.2)
        table = hypothesis_service.packing_distances(thresholds10, packing)
        assert table.shape == (4, 4)
        assert table[0, 1] == pytest.approx(0.3)


class TestMinCover:

    def test_threshold_cover(self, thresholds10):
        assert hypothesis_service.min_cover_bruteforce(thresholds10.hclass, thresholds10.marginal, 0.1) == 4

    def test_radius_one_needs_one_ball(self, thresholds10):
        assert hypothesis_service.min_cover_bruteforce(thresholds10.hclass, thresholds10.marginal, 1.0) == 1

    def test_size_guard(self):
        instance = instance_service.gen_thresholds(20)
        with pytest.raises(InstanceError):
            hypothesis_service.min_cover_bruteforce(instance.hclass, instance.marginal, 0.1)

    def test_worked_threshold_cover(self):
        instance = instance_service.gen_thresholds(4)
        assert hypothesis_service.min_cover_bruteforce(instance.hclass, instance.marginal, 0.25) == 2

    def test_zero_radius_distinct_rows(self):
        instance = instance_service.gen_thresholds(5)
        assert hypothesis_service.min_cover_bruteforce(instance.hclass, instance.marginal, 0.0) == 6


def _random_class(seed: int):
    rng = np.random.default_rng(seed)
    n_hypotheses, n_points = int(rng.integers(4, 13)), int(rng.integers(3, 10))
    hclass = HypothesisClass(rng.integers(0, 2, size=(n_hypotheses, n_points)).astype(np.uint8))
    return hclass, Marginal(rng.dirichlet(np.ones(n_points))), rng


@pytest.mark.parametrize('seed', range(8))
class TestMetricProperties:

    def test_pseudometric(self, seed):
        hclass, marginal, _ = _random_class(seed)
        table = hypothesis_service.distance_matrix(hclass, marginal)

        assert np.all(table >= 0.0)
        np.testing.assert_allclose(table, table.T, atol=1e-12)
        for h in range(hclass.n_hypotheses):
            for h2 in range(hclass.n_hypotheses):
                assert hypothesis_service.distance(hclass, marginal, h, h2) == pytest.approx(table[h, h2], abs=1e-12)
        through = table[:, :, None] + table[None, :, :]
        assert np.all(table[:, None, :] <= through + 1e-12)

    def test_packing_is_maximal(self, seed):
        hclass, marginal, rng = _random_class(seed)
        radius = float(rng.uniform(0.05, 0.5))
        packing = hypothesis_service.greedy_maximal_packing(hclass, marginal, radius)
        table = hypothesis_service.distance_matrix(hclass, marginal)

        members = list(packing.members)
        inner = table[np.ix_(members, members)]
        assert np.all(inner[~np.eye(len(members), dtype=bool)] > radius)
        assert np.all(table[:, members].min(axis=1) <= radius)

    def test_packing_no_larger_than_half_radius_cover(self, seed):
        hclass, marginal, rng = _random_class(seed)
        eta = float(rng.uniform(0.02, 0.3))
        packing = hypothesis_service.greedy_maximal_packing(hclass, marginal, 2 * eta)
        assert len(packing) <= hypothesis_service.min_cover_bruteforce(hclass, marginal, eta)
