import numpy as np
import pytest

from evoattack.pareto import (
    binary_tournament,
    crowding_distance,
    dominates,
    environmental_selection,
    nondominated_sort,
    rank_and_crowd,
)


def brute_force_fronts(objectives):
    """Independent reference: peel nondominated layers by direct definition."""
    f = np.asarray(objectives, dtype=float)
    remaining = list(range(f.shape[0]))
    fronts = []
    while remaining:
        front = [
            i
            for i in remaining
            if not any(dominates(f[j], f[i]) for j in remaining if j != i)
        ]
        fronts.append(front)
        remaining = [i for i in remaining if i not in front]
    return fronts


class TestDominates:
    def test_strictly_better_both(self):
        assert dominates([0.2, 1.0], [0.3, 1.5])

    def test_incomparable(self):
        assert not dominates([0.2, 2.0], [0.3, 1.5])
        assert not dominates([0.3, 1.5], [0.2, 2.0])

    def test_equal_vectors_do_not_dominate(self):
        assert not dominates([0.2, 1.0], [0.2, 1.0])

    def test_weak_improvement_suffices(self):
        assert dominates([0.2, 1.0], [0.2, 1.1])


class TestNondominatedSort:
    def test_small_example(self):
        part = nondominated_sort(np.array([[1, 2], [2, 1], [3, 3]]))
        assert part.fronts == [[0, 1], [2]]
        assert np.array_equal(part.rank, [0, 0, 1])

    def test_identical_objectives_single_front(self):
        part = nondominated_sort(np.ones((5, 2)))
        assert part.fronts == [[0, 1, 2, 3, 4]]

    def test_total_order_chain(self):
        part = nondominated_sort(np.array([[1, 1], [2, 2], [3, 3]]))
        assert part.fronts == [[0], [1], [2]]

    def test_matches_brute_force_on_random_populations(self):
        rng = np.random.default_rng(21)
        for _ in range(100):
            n = int(rng.integers(1, 201))
            m = int(rng.choice([2, 3]))
            # small integer grid provokes plenty of ties and duplicates
            f = rng.integers(0, 8, size=(n, m)).astype(float)
            got = nondominated_sort(f)
            want = brute_force_fronts(f)
            assert got.fronts == want
            for level, front in enumerate(want):
                assert all(got.rank[i] == level for i in front)

    def test_front_partition_invariants(self):
        rng = np.random.default_rng(22)
        f = rng.random((60, 2))
        part = nondominated_sort(f)
        seen = sorted(i for front in part.fronts for i in front)
        assert seen == list(range(60))
        # every member of front k>0 is dominated by someone one level up
        for level in range(1, len(part.fronts)):
            for i in part.fronts[level]:
                assert any(dominates(f[j], f[i]) for j in part.fronts[level - 1])


class TestCrowdingDistance:
    def test_pair_is_all_infinite(self):
        assert np.all(np.isinf(crowding_distance(np.array([[1, 2], [2, 1]]))))

    def test_hand_computed_middle(self):
        dist = crowding_distance(np.array([[1, 3], [2, 2], [3, 1]], dtype=float))
        assert np.isinf(dist[0]) and np.isinf(dist[2])
        assert dist[1] == pytest.approx(2.0)

    def test_duplicates_get_zero_gap(self):
        # three identical points: boundary slots go to two of them, the
        # duplicate in the middle accumulates zero
        dist = crowding_distance(np.array([[1, 1], [1, 1], [1, 1]], dtype=float))
        assert dist[1] == 0.0


class _FakeRng:
    """integers() pops scripted draws, so tie-break rules are tested directly."""

    def __init__(self, draws):
        self.draws = list(draws)

    def integers(self, _n):
        return self.draws.pop(0)


class TestBinaryTournament:
    def test_lower_rank_wins(self):
        rank = np.array([0, 1])
        crowd = np.array([0.0, 9.9])
        winners = binary_tournament(rank, crowd, _FakeRng([0, 1]), 1)
        assert winners.tolist() == [0]

    def test_equal_rank_higher_crowding_wins(self):
        rank = np.array([0, 0])
        crowd = np.array([np.inf, 1.0])
        winners = binary_tournament(rank, crowd, _FakeRng([1, 0]), 1)
        assert winners.tolist() == [0]

    def test_full_tie_first_drawn_wins(self):
        rank = np.array([0, 0])
        crowd = np.array([1.0, 1.0])
        winners = binary_tournament(rank, crowd, _FakeRng([1, 0]), 1)
        assert winners.tolist() == [1]

    def test_count_and_determinism(self):
        rng1 = np.random.default_rng(5)
        rng2 = np.random.default_rng(5)
        f = np.random.default_rng(0).random((12, 2))
        part, crowd = rank_and_crowd(f)
        a = binary_tournament(part.rank, crowd, rng1, 30)
        b = binary_tournament(part.rank, crowd, rng2, 30)
        assert a.shape == (30,)
        assert np.array_equal(a, b)


class TestEnvironmentalSelection:
    def test_union_size_equals_n(self):
        f = np.random.default_rng(1).random((8, 2))
        assert sorted(environmental_selection(f, 8)) == list(range(8))

    def test_truncation_keeps_boundary_individuals(self):
        # front 0: a=(1,3) b=(2,2) c=(3,1); d=(4,4) is dominated
        f = np.array([[1, 3], [2, 2], [3, 1], [4, 4]], dtype=float)
        survivors = environmental_selection(f, 2)
        assert sorted(survivors) == [0, 2]

    def test_never_trades_nondominated_for_dominated(self):
        # Fronts fill in strict rank order: a deeper-front individual can only
        # survive once every shallower front is fully admitted.
        rng = np.random.default_rng(31)
        for _ in range(60):
            u = int(rng.integers(4, 40))
            n = int(rng.integers(2, u + 1))
            f = rng.integers(0, 6, size=(u, 2)).astype(float)
            survivors = set(environmental_selection(f, n))
            assert len(survivors) == n
            room = n
            for front in brute_force_fronts(f):
                front = set(front)
                if len(front) <= room:
                    assert front <= survivors
                    room -= len(front)
                else:
                    assert len(survivors & front) == room
                    room = 0
                if room == 0:
                    break

    def test_splitting_front_truncated_by_crowding(self):
        f = np.array([[1, 5], [2, 4], [2.1, 3.9], [5, 1]], dtype=float)
        # all mutually nondominated; boundaries 0 and 3 get inf; interior:
        #   point 1: (2.1-1)/4 + (5-3.9)/4 = 0.55
        #   point 2: (5-2)/4  + (4-1)/4    = 1.50
        survivors = environmental_selection(f, 3)
        assert sorted(survivors) == [0, 2, 3]
