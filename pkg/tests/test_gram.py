import numpy as np
import pytest

from easecf import (
    InteractionMatrix,
    ZeroVarianceError,
    build_gram,
    load_gram,
    merge_grams,
    save_gram,
)

from conftest import random_binary_matrix


def dense_transform_oracle(dense, mode):
    """Densify, transform columns explicitly, multiply. Test-side reference."""
    x = np.asarray(dense, dtype=np.float64)
    if mode in ("centered", "standardized"):
        x = x - x.mean(axis=0, keepdims=True)
    if mode == "standardized":
        x = x / x.std(axis=0, keepdims=True)  # population std
    return x.T @ x


class TestBuildGram:
    def test_worked_2x2(self, tiny_matrix):
        g = build_gram(tiny_matrix)
        assert g.values.tolist() == [[2.0, 1.0], [1.0, 1.0]]
        assert g.mode == "cooccurrence"
        assert g.n_users_used == 2

    def test_diagonal_is_item_activity(self, rng):
        X = random_binary_matrix(rng, 40, 12, density=0.3)
        g = build_gram(X)
        assert np.array_equal(np.diag(g.values), X.item_counts())

    def test_cooccurrence_entries_are_counts(self, rng):
        X = random_binary_matrix(rng, 30, 8, density=0.4)
        g = build_gram(X)
        assert np.all(g.values >= 0)
        assert np.array_equal(g.values, np.round(g.values))

    def test_symmetry_bit_exact(self, rng):
        X = random_binary_matrix(rng, 25, 10, density=0.35)
        for mode in ("cooccurrence", "centered", "standardized"):
            g = build_gram(X, mode)
            assert np.array_equal(g.values, g.values.T)

    def test_centered_matches_dense_oracle(self, rng):
        dense = (rng.random((8, 5)) < 0.5).astype(float)
        dense[dense.sum(axis=1) == 0, 0] = 1.0
        X = InteractionMatrix.from_dense(dense)
        g = build_gram(X, "centered")
        expected = dense_transform_oracle(X.toarray(), "centered")
        np.testing.assert_allclose(g.values, expected, atol=1e-12)
        np.testing.assert_allclose(g.column_means, X.toarray().mean(axis=0))

    def test_standardized_matches_dense_oracle(self, rng):
        for _ in range(5):
            X = random_binary_matrix(rng, 20, 6, density=0.5)
            if np.any(X.item_counts() == X.n_users):
                continue  # constant column, not standardizable
            g = build_gram(X, "standardized")
            expected = dense_transform_oracle(X.toarray(), "standardized")
            np.testing.assert_allclose(g.values, expected, atol=1e-9)

    def test_standardized_zero_variance_names_item(self):
        X = InteractionMatrix.from_dense(
            [[1.0, 1.0], [1.0, 0.0]], item_ids=["always", "other"]
        )
        with pytest.raises(ZeroVarianceError, match="always"):
            build_gram(X, "standardized")

    def test_permutation_equivariance(self, rng):
        X = random_binary_matrix(rng, 20, 7, density=0.4)
        perm = rng.permutation(7)
        Xp = InteractionMatrix.from_dense(X.toarray()[:, perm])
        g = build_gram(X).values
        gp = build_gram(Xp).values
        assert np.array_equal(gp, g[np.ix_(perm, perm)])

    def test_positive_semidefinite(self, rng):
        for mode in ("cooccurrence", "centered"):
            X = random_binary_matrix(rng, 15, 9, density=0.4)
            g = build_gram(X, mode)
            eigs = np.linalg.eigvalsh(g.values)
            assert eigs.min() > -1e-9

    def test_unknown_mode(self, tiny_matrix):
        with pytest.raises(ValueError):
            build_gram(tiny_matrix, "weird")

    def test_poisson_uncertainty_sanity(self):
        # resampled co-occurrence counts fluctuate on the scale sqrt(mean)
        rng = np.random.default_rng(77)
        p_i, p_j, p_both = 0.5, 0.5, 0.4
        n_users, n_rep = 400, 200
        counts = np.empty(n_rep)
        for r in range(n_rep):
            both = rng.random(n_users) < p_both
            only_i = ~both & (rng.random(n_users) < (p_i - p_both) / (1 - p_both))
            only_j = ~both & ~only_i & (rng.random(n_users) < 0.2)
            x = np.zeros((n_users, 3))
            x[both | only_i, 0] = 1.0
            x[both | only_j, 1] = 1.0
            x[:, 2] = 1.0  # keep every user non-empty
            g = build_gram(InteractionMatrix.from_dense(x))
            counts[r] = g.values[0, 1]
        observed_std = counts.std(ddof=1)
        poisson_std = np.sqrt(counts.mean())
        assert observed_std < 2 * poisson_std
        assert observed_std > poisson_std / 4  # not degenerate either


class TestMergeGrams:
    def shards(self, rng, n_users=20, n_items=10, parts=3):
        X = random_binary_matrix(rng, n_users, n_items, density=0.4)
        bounds = np.linspace(0, n_users, parts + 1).astype(int)
        shards = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            sub = InteractionMatrix(
                X.csr[lo:hi],
                users_slice(X, lo, hi),
                X.items,
            )
            shards.append(build_gram(sub))
        return X, shards

    def test_shards_sum_to_full_exactly(self, rng):
        X, shards = self.shards(rng)
        merged = merge_grams(shards)
        full = build_gram(X)
        assert np.array_equal(merged.values, full.values)
        assert merged.n_users_used == X.n_users

    def test_single_part_identity(self, rng):
        X = random_binary_matrix(rng, 10, 6)
        g = build_gram(X)
        merged = merge_grams([g])
        assert np.array_equal(merged.values, g.values)
        assert merged.n_users_used == g.n_users_used

    def test_two_halves_additive(self, rng):
        X1 = random_binary_matrix(rng, 8, 5, density=0.5)
        X2 = InteractionMatrix(
            random_binary_matrix(rng, 12, 5, density=0.5).csr,
            users_renamed(12, "w"),
            X1.items,
        )
        stacked = InteractionMatrix.from_dense(
            np.vstack([X1.toarray(), X2.toarray()]), item_ids=X1.items.ids
        )
        merged = merge_grams([build_gram(X1), build_gram(X2)])
        assert np.array_equal(merged.values, build_gram(stacked).values)

    def test_mode_must_be_cooccurrence(self, rng):
        X = random_binary_matrix(rng, 10, 5, density=0.6)
        g = build_gram(X, "centered")
        with pytest.raises(ValueError, match="cooccurrence"):
            merge_grams([g, g])

    def test_vocab_mismatch_rejected(self, rng):
        a = build_gram(random_binary_matrix(rng, 10, 5))
        b = build_gram(
            InteractionMatrix.from_dense(
                np.ones((4, 5)), item_ids=[f"other{k}" for k in range(5)]
            )
        )
        with pytest.raises(ValueError, match="vocab"):
            merge_grams([a, b])

    def test_empty_list(self):
        with pytest.raises(ValueError):
            merge_grams([])


class TestGramPersistence:
    def test_round_trip_cooccurrence(self, rng, tmp_path):
        g = build_gram(random_binary_matrix(rng, 15, 8))
        save_gram(g, tmp_path / "g.gram")
        loaded = load_gram(tmp_path / "g.gram")
        assert np.array_equal(loaded.values, g.values)
        assert loaded.mode == g.mode
        assert loaded.n_users_used == g.n_users_used
        assert loaded.items.ids == g.items.ids
        assert loaded.column_means is None and loaded.column_stds is None

    def test_round_trip_standardized(self, rng, tmp_path):
        X = random_binary_matrix(rng, 30, 6, density=0.5)
        if np.any(X.item_counts() == X.n_users):
            pytest.skip("constant column in draw")
        g = build_gram(X, "standardized")
        save_gram(g, tmp_path / "g.gram")
        loaded = load_gram(tmp_path / "g.gram")
        assert np.array_equal(loaded.values, g.values)
        assert np.array_equal(loaded.column_means, g.column_means)
        assert np.array_equal(loaded.column_stds, g.column_stds)

    def test_not_a_gram_file(self, tmp_path):
        from easecf import FormatError

        path = tmp_path / "bogus"
        path.write_bytes(b"hello world\n123")
        with pytest.raises(FormatError):
            load_gram(path)


def users_slice(X, lo, hi):
    from easecf import Vocabulary

    return Vocabulary(tuple(X.users.ids[lo:hi]))


def users_renamed(n, prefix):
    from easecf import Vocabulary

    return Vocabulary(tuple(f"{prefix}{k}" for k in range(n)))
