import numpy as np
import pytest

from easecf import GramMatrix, InteractionMatrix, Vocabulary


def random_binary_matrix(rng, n_users, n_items, density=0.3) -> InteractionMatrix:
    """Random binary interaction matrix; every user has at least one item."""
    dense = (rng.random((n_users, n_items)) < density).astype(np.float64)
    empty = np.flatnonzero(dense.sum(axis=1) == 0)
    if empty.size:
        dense[empty, rng.integers(0, n_items, size=empty.size)] = 1.0
    return InteractionMatrix.from_dense(dense)


def gram_from_dense(values, mode="cooccurrence", n_users_used=0) -> GramMatrix:
    """Wrap a plain symmetric array as a GramMatrix for solver-level tests."""
    values = np.asarray(values, dtype=np.float64)
    items = Vocabulary(tuple(f"i{j}" for j in range(values.shape[0])))
    return GramMatrix(values, mode, n_users_used, items)


def random_psd_gram(rng, n_items, n_users=None) -> GramMatrix:
    """Co-occurrence Gram of a random binary matrix (PSD by construction)."""
    from easecf import build_gram

    n_users = n_users or 4 * n_items
    return build_gram(random_binary_matrix(rng, n_users, n_items))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def tiny_matrix():
    """The 2x2 worked example: X = [[1, 1], [1, 0]] gives G = [[2, 1], [1, 1]]."""
    return InteractionMatrix.from_dense([[1.0, 1.0], [1.0, 0.0]])
