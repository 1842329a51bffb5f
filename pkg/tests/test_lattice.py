import itertools

import numpy as np
import pytest

from sawlab.lattice import (
    IDENTITY, PIVOT_MOVES, STEPS, SYMMETRIES, apply_symmetry, enumerate_saws, in_half_space,
    is_lattice_symmetry, is_nearest_neighbor, is_self_avoiding, is_valid_walk, new_rod,
    symmetry_index,
)

from conftest import random_saw


def brute_force_count(n, half=False):
    """Independent oracle: filter all 6**n step sequences."""
    count = 0
    for seq in itertools.product(range(6), repeat=n):
        walk = np.vstack([np.zeros((1, 3), dtype=np.int64), np.cumsum(STEPS[list(seq)], axis=0)])
        if len(set(map(tuple, walk.tolist()))) == n + 1 and (not half or np.all(walk[1:, 2] >= 1)):
            count += 1
    return count


class TestRod:
    def test_plus_z(self):
        np.testing.assert_array_equal(new_rod(3, "+z"), [[0, 0, 0], [0, 0, 1], [0, 0, 2], [0, 0, 3]])

    def test_plus_x(self):
        np.testing.assert_array_equal(new_rod(1, "+x"), [[0, 0, 0], [1, 0, 0]])

    def test_endpoint(self):
        assert new_rod(5, "+z")[-1, 2] == 5

    def test_half_space_rod(self):
        assert in_half_space(new_rod(7, "+z"))
        assert is_valid_walk(new_rod(7, "+z"), "half")

    def test_vector_axis(self):
        np.testing.assert_array_equal(new_rod(2, (0, -1, 0))[-1], [0, -2, 0])

    def test_zero_steps_rejected(self):
        with pytest.raises(ValueError):
            new_rod(0)


class TestSelfAvoidance:
    def test_rod(self):
        assert is_self_avoiding(new_rod(4, "+z"))

    def test_return_to_origin(self):
        loop = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 0]])
        assert is_nearest_neighbor(loop)
        assert not is_self_avoiding(loop)

    def test_all_enumerated_walks(self):
        walks = []
        res = enumerate_saws(4, visit=walks.append)
        assert res.count == len(walks) == 726
        assert all(is_self_avoiding(w) and is_nearest_neighbor(w) for w in walks)
        assert len({w.tobytes() for w in walks}) == 726


class TestSymmetries:
    def test_order_48_and_identity_first(self):
        assert SYMMETRIES.shape == (48, 3, 3)
        np.testing.assert_array_equal(IDENTITY, np.eye(3))
        assert PIVOT_MOVES.shape == (47, 3, 3)
        assert len({g.tobytes() for g in SYMMETRIES}) == 48

    def test_all_signed_permutations(self):
        assert all(is_lattice_symmetry(g) for g in SYMMETRIES)
        for g in SYMMETRIES:
            np.testing.assert_array_equal(g @ g.T, np.eye(3))

    def test_closure_and_inverse(self):
        keys = {g.tobytes(): i for i, g in enumerate(SYMMETRIES)}
        for g, h in itertools.product(SYMMETRIES, repeat=2):
            assert (g @ h).tobytes() in keys
        for g in SYMMETRIES:
            assert g.T.tobytes() in keys

    def test_identity_fixes_points(self):
        np.testing.assert_array_equal(apply_symmetry(IDENTITY, (2, -1, 3)), (2, -1, 3))

    def test_quarter_turn_about_z(self):
        g = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1]])
        np.testing.assert_array_equal(apply_symmetry(g, (1, 0, 0)), (0, 1, 0))
        assert symmetry_index(g) > 0

    def test_norm_preserved(self, rng):
        for _ in range(200):
            g = SYMMETRIES[rng.integers(48)]
            p = rng.integers(-50, 50, size=3)
            assert np.linalg.norm(apply_symmetry(g, p)) == pytest.approx(np.linalg.norm(p))

    def test_walk_image_is_a_saw(self, rng):
        walk = random_saw(30, rng)
        for g in SYMMETRIES:
            assert is_valid_walk(apply_symmetry(g, walk))

    def test_not_a_symmetry(self):
        with pytest.raises(ValueError):
            symmetry_index(np.array([[1, 1, 0], [0, 1, 0], [0, 0, 1]]))


class TestEnumeration:
    @pytest.mark.parametrize("n, expected", [(1, 6), (2, 30), (4, 726)])
    def test_full_space_counts(self, n, expected):
        assert enumerate_saws(n).count == expected

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_matches_brute_force(self, n):
        assert enumerate_saws(n).count == brute_force_count(n)
        assert enumerate_saws(n, "half").count == brute_force_count(n, half=True)

    def test_known_cubic_series(self):
        # c_N for the simple cubic lattice
        assert [enumerate_saws(n).count for n in range(1, 8)] == [6, 30, 150, 726, 3534, 16926, 81390]

    @pytest.mark.parametrize("n", range(2, 8))
    def test_growth_band(self, n):
        assert 4 < enumerate_saws(n).count / enumerate_saws(n - 1).count < 6

    @pytest.mark.parametrize("n", range(1, 8))
    def test_half_space_smaller(self, n):
        assert enumerate_saws(n, "half").count < enumerate_saws(n).count

    def test_half_space_walks_satisfy_constraint(self):
        walks = []
        enumerate_saws(4, "half", visit=walks.append)
        assert all(in_half_space(w) for w in walks)
        assert all(w[1, 2] == 1 for w in walks)

    def test_guard(self):
        with pytest.raises(ValueError, match="refusing"):
            enumerate_saws(11)

    def test_unknown_constraint(self):
        with pytest.raises(ValueError):
            enumerate_saws(2, "slab")
