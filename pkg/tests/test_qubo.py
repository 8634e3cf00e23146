import itertools
import math

import numpy as np
import pytest

from conntra import qubo
from conntra.errors import CapacityError, FormatError, InvalidArgumentError, NotPositiveDefiniteError
from conntra.qubo import (
    BinaryTrainingInstance,
    QuboInstance,
    brute_force_qubo,
    brute_force_training,
    cholesky,
    forward_substitution,
    parse_qubo_text,
    format_qubo_text,
    qubo_value,
    reduce_qubo,
    symmetrize,
    training_value,
)
from conntra.rng import SplitMix64


def random_spd_instance(seed, d, with_c=True):
    rng = SplitMix64(seed)
    M = rng.uniform_array(-1, 1, d * d).reshape(d, d)
    A = symmetrize(M.T @ M + d * np.eye(d))
    b = rng.uniform_array(-2, 2, d)
    c = rng.uniform_array(-1, 1, 1)[0] if with_c else 0.0
    return QuboInstance(A, b, c)


def all_binary_vectors(d):
    return [np.array(bits, dtype=float) for bits in itertools.product((0, 1), repeat=d)]


class TestCholesky:
    def test_identity(self):
        assert np.array_equal(cholesky(np.eye(4)), np.eye(4))

    def test_hand_checkable_2x2(self):
        L = cholesky(np.array([[4.0, 2.0], [2.0, 3.0]]))
        assert np.allclose(L, [[2.0, 0.0], [1.0, math.sqrt(2)]], atol=1e-15)

    def test_random_spd_reconstruction(self):
        rng = SplitMix64(3)
        for d in (1, 2, 5, 8, 12):
            M = rng.uniform_array(-1, 1, d * d).reshape(d, d)
            A = symmetrize(M.T @ M + d * np.eye(d))
            L = cholesky(A)
            assert np.tril(L).tolist() == L.tolist()
            assert np.all(np.diag(L) > 0)
            assert np.abs(L @ L.T - A).max() <= 1e-10 * np.abs(A).max()

    def test_recovers_triangular_factor(self):
        rng = SplitMix64(4)
        for d in (2, 4, 7):
            L = np.tril(rng.uniform_array(-1, 1, d * d).reshape(d, d))
            np.fill_diagonal(L, np.abs(np.diag(L)) + 0.5)
            back = cholesky(L @ L.T)
            assert np.abs(back - L).max() <= 1e-10

    def test_rejects_indefinite(self):
        with pytest.raises(NotPositiveDefiniteError):
            cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))  # eigenvalues 3, -1

    def test_rejects_non_symmetric(self):
        with pytest.raises(InvalidArgumentError):
            cholesky(np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_rejects_semidefinite(self):
        with pytest.raises(NotPositiveDefiniteError):
            cholesky(np.array([[1.0, 1.0], [1.0, 1.0]]))


class TestForwardSubstitution:
    def test_matches_solve(self):
        rng = SplitMix64(5)
        for d in (1, 3, 6):
            L = np.tril(rng.uniform_array(-1, 1, d * d).reshape(d, d))
            np.fill_diagonal(L, np.abs(np.diag(L)) + 1.0)
            b = rng.uniform_array(-1, 1, d)
            assert np.allclose(L @ forward_substitution(L, b), b, atol=1e-12)


class TestSymmetrize:
    def test_symmetric_unchanged(self):
        A = np.array([[1.0, 2.0], [2.0, 5.0]])
        assert np.array_equal(symmetrize(A), A)

    def test_hand_checkable(self):
        assert symmetrize(np.array([[1.0, 2.0], [0.0, 1.0]])).tolist() == [[1.0, 1.0], [1.0, 1.0]]

    def test_quadratic_form_invariant(self):
        rng = SplitMix64(6)
        A = rng.uniform_array(-2, 2, 36).reshape(6, 6)
        S = symmetrize(A)
        for _ in range(100):
            z = rng.uniform_array(-1, 1, 6)
            assert z @ A @ z == pytest.approx(z @ S @ z, abs=1e-12)

    def test_rejects_non_square(self):
        with pytest.raises(InvalidArgumentError):
            symmetrize(np.zeros((2, 3)))


class TestQuboInstance:
    def test_rejects_indefinite(self):
        with pytest.raises(NotPositiveDefiniteError):
            QuboInstance(np.array([[1.0, 2.0], [2.0, 1.0]]), np.zeros(2), 0.0)

    def test_rejects_asymmetric(self):
        with pytest.raises(InvalidArgumentError):
            QuboInstance(np.array([[1.0, 0.5], [0.0, 1.0]]), np.zeros(2), 0.0)

    def test_rejects_bad_b(self):
        with pytest.raises(InvalidArgumentError):
            QuboInstance(np.eye(2), np.zeros(3), 0.0)


class TestReduction:
    def test_identity_two_dim_instance(self):
        q = QuboInstance(np.eye(2), np.array([-3.0, 1.0]), 0.0)
        z, value = brute_force_qubo(q)
        assert list(z) == [1, 0]
        assert value == -2.0
        t = reduce_qubo(q)
        zt, vt = brute_force_training(t)
        assert list(zt) == [1, 0]
        assert value == pytest.approx(vt + t.offset / t.X.shape[0], abs=1e-9)

    def test_zero_b_optimum_is_zero_vector(self):
        for seed in range(5):
            q = random_spd_instance(seed, 4, with_c=False)
            q = QuboInstance(q.A, np.zeros(4), 0.0)
            z, value = brute_force_qubo(q)
            assert list(z) == [0, 0, 0, 0]
            assert value == 0.0
            zt, vt = brute_force_training(reduce_qubo(q))
            assert list(zt) == [0, 0, 0, 0]

    def test_objective_identity_exhaustive(self):
        # same constant gap for every assignment, and it equals offset/N
        for seed in range(8):
            d = 2 + seed % 5
            q = random_spd_instance(seed, d)
            t = reduce_qubo(q)
            shift = t.offset / t.X.shape[0]
            gaps = [qubo_value(q, z) - training_value(t, z) for z in all_binary_vectors(d)]
            assert max(abs(g - shift) for g in gaps) < 1e-9

    def test_argmin_sets_identical(self):
        for seed in range(10):
            d = 2 + seed % 6
            q = random_spd_instance(seed + 100, d)
            t = reduce_qubo(q)
            vectors = all_binary_vectors(d)
            qv = np.array([qubo_value(q, z) for z in vectors])
            tv = np.array([training_value(t, z) for z in vectors])
            q_set = {tuple(map(int, vectors[i])) for i in np.flatnonzero(qv <= qv.min() + 1e-12)}
            t_set = {tuple(map(int, vectors[i])) for i in np.flatnonzero(tv <= tv.min() + 1e-12)}
            assert q_set == t_set

    def test_brute_force_matches_exhaustive_oracle(self):
        q = random_spd_instance(42, 6)
        z, value = brute_force_qubo(q)
        vectors = all_binary_vectors(6)
        values = [qubo_value(q, v) for v in vectors]
        assert value == pytest.approx(min(values), abs=1e-12)
        assert list(z) == list(map(int, vectors[int(np.argmin(values))]))

    def test_tie_breaks_to_lexicographically_smallest(self):
        # (0,0) and (1,0) both reach the minimum value 0
        q = QuboInstance(np.eye(2), np.array([-1.0, 0.0]), 0.0)
        z, value = brute_force_qubo(q)
        assert value == 0.0
        assert list(z) == [0, 0]

    def test_capacity_guard(self):
        with pytest.raises(CapacityError):
            qubo.brute_force_qubo(
                QuboInstance(np.eye(25), np.zeros(25), 0.0)
            )

    def test_training_instance_requires_square_x(self):
        with pytest.raises(InvalidArgumentError):
            BinaryTrainingInstance(np.zeros((3, 2)), np.zeros(3), 0.0)


class TestTextFormat:
    def test_roundtrip(self):
        q = random_spd_instance(7, 5)
        back = parse_qubo_text(format_qubo_text(q))
        assert np.array_equal(back.A, q.A)
        assert np.array_equal(back.b, q.b)
        assert back.c == q.c

    def test_bad_dimension_line(self):
        with pytest.raises(FormatError, match="line 1"):
            parse_qubo_text("two\n1 0\n0 1\n0 0\n0\n")

    def test_wrong_row_width(self):
        with pytest.raises(FormatError, match="line 3"):
            parse_qubo_text("2\n1 0\n0\n0 0\n0\n")

    def test_missing_lines(self):
        with pytest.raises(FormatError):
            parse_qubo_text("2\n1 0\n0 1\n")

    def test_non_numeric(self):
        with pytest.raises(FormatError, match="line 4"):
            parse_qubo_text("2\n1 0\n0 1\nx y\n0\n")
