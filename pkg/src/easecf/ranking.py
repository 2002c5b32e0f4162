"""Scoring user histories against a trained model and extracting top-k lists.

A user's score vector is the dot product of their (sparse) history row
with the weight matrix. Only ranks matter downstream, so scores are raw
reals. Ties are broken by ascending item index for deterministic output.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import EaseError
from .solver import WeightModel


@dataclass(frozen=True)
class RankedList:
    """Ordered top-k recommendation list for one user."""

    user_id: str
    items: np.ndarray
    scores: np.ndarray

    def __len__(self) -> int:
        return len(self.items)


def score_user(
    item_indices: np.ndarray,
    values: np.ndarray,
    model: WeightModel,
) -> np.ndarray:
    """Dense score vector for one user's history.

    Cost is O(nnz(history) * n_items). For centered/standardized models
    the history is moved into the Gram's column space first (subtract
    means, divide by stds); the constant part of that shift is
    precomputed on the model.
    """
    item_indices = np.asarray(item_indices, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    if item_indices.size and (
        item_indices.min() < 0 or item_indices.max() >= model.n_items
    ):
        raise IndexError(
            f"history item index out of range for {model.n_items} items"
        )
    if model.gram_mode == "standardized":
        values = values / model.column_stds[item_indices]
    if item_indices.size:
        scores = values @ model.B[item_indices]
    else:
        scores = np.zeros(model.n_items)
    shift = model.score_shift()
    if shift is not None:
        scores = scores + shift
    return scores


def top_k(
    scores: np.ndarray,
    exclude: Iterable[int] | np.ndarray | None,
    k: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Indices and scores of the k best items outside ``exclude``.

    Ties break toward the smaller item index. Returns fewer than k items
    only when the candidates are exhausted.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scores = np.asarray(scores)
    if exclude is not None:
        mask = np.ones(len(scores), dtype=bool)
        excl = np.asarray(list(exclude) if not isinstance(exclude, np.ndarray) else exclude,
                          dtype=np.int64)
        mask[excl] = False
        candidates = np.flatnonzero(mask)
    else:
        candidates = np.arange(len(scores))
    # stable sort on negated scores; candidates are in ascending index
    # order, so equal scores keep the smaller index first
    order = np.argsort(-scores[candidates], kind="stable")[:k]
    chosen = candidates[order]
    return chosen, scores[chosen]


def recommend_batch(
    histories: Sequence[tuple[str, np.ndarray, np.ndarray]],
    model: WeightModel,
    k: int,
    exclude_history: bool = True,
) -> list[RankedList]:
    """Top-k lists for a batch of (user_id, item_indices, values) histories.

    Output order matches input order. Failures are re-raised with the
    offending user attached.
    """
    out: list[RankedList] = []
    for user_id, indices, values in histories:
        try:
            scores = score_user(indices, values, model)
            items, item_scores = top_k(
                scores, indices if exclude_history else None, k
            )
        except (EaseError, IndexError, ValueError) as exc:
            raise type(exc)(f"user {user_id!r}: {exc}") from exc
        out.append(RankedList(user_id, items, item_scores))
    return out


def format_ranked_lines(
    batch: Iterable[RankedList],
    item_ids: Sequence[str],
) -> Iterable[str]:
    """Serialize lists as ``user_id<TAB>item:score,...`` with 6 significant digits."""
    for ranked in batch:
        pairs = ",".join(
            f"{item_ids[int(i)]}:{s:.6g}"
            for i, s in zip(ranked.items, ranked.scores)
        )
        yield f"{ranked.user_id}\t{pairs}"
