"""Ranking metrics, the evaluation loop, baselines, and model diagnostics.

Recall@k normalizes by min(k, number of held-out items); NDCG@k uses
binary relevance with a 1/log2(rank+1) discount and a truncated ideal
gain. Both depend only on where held-out items land in the ranking, never
on score magnitudes. Baselines share the scoring/exclusion/ranking
pipeline with the trained model so that protocol differences cannot skew
comparisons.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import EaseError, VocabMismatchError
from .gram import build_gram
from .interactions import InteractionMatrix
from .ranking import RankedList, score_user, top_k
from .solver import WeightModel
from .splits import EvalSplit

METRIC_NAMES = ("recall", "ndcg")

# Published benchmark results for the datasets this model family is
# usually reported on; used by the CLI's --compare-reference flag.
REFERENCE_RESULTS = {
    "ml-20m": {
        "popularity": {"recall@20": 0.162, "recall@50": 0.235, "ndcg@100": 0.191},
        "ease": {"recall@20": 0.391, "recall@50": 0.521, "ndcg@100": 0.420},
        "ease_nonneg": {"recall@20": 0.373, "recall@50": 0.499, "ndcg@100": 0.402},
    },
    "netflix": {
        "popularity": {"recall@20": 0.116, "recall@50": 0.175, "ndcg@100": 0.159},
        "ease": {"recall@20": 0.362, "recall@50": 0.445, "ndcg@100": 0.393},
        "ease_nonneg": {"recall@20": 0.345, "recall@50": 0.424, "ndcg@100": 0.373},
    },
    "msd": {
        "popularity": {"recall@20": 0.043, "recall@50": 0.068, "ndcg@100": 0.058},
        "ease": {"recall@20": 0.333, "recall@50": 0.428, "ndcg@100": 0.389},
        "ease_nonneg": {"recall@20": 0.324, "recall@50": 0.418, "ndcg@100": 0.379},
    },
    "ml-10m-weak": {
        "ease": {"ndcg@10": 0.6258},
        "ease_nonneg": {"ndcg@10": 0.6199},
        "item-item": {"ndcg@10": 0.5957},
    },
}


@dataclass
class MetricReport:
    metric: str
    k: int
    mean: float
    std_error: float
    n_users: int
    per_user: np.ndarray | None = None

    @property
    def name(self) -> str:
        return f"{self.metric}@{self.k}"


def recall_at_k(ranked_items: Sequence[int], held_out: set, k: int) -> float:
    """Fraction of held-out items in the top k, normalized by min(k, |held_out|)."""
    if not held_out:
        raise ValueError("held_out must be non-empty")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    hits = sum(1 for item in ranked_items[:k] if item in held_out)
    return hits / min(k, len(held_out))


def ndcg_at_k(ranked_items: Sequence[int], held_out: set, k: int) -> float:
    """Binary-relevance NDCG with 1/log2(i+1) discounts and truncated ideal gain."""
    if not held_out:
        raise ValueError("held_out must be non-empty")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    dcg = 0.0
    for pos, item in enumerate(ranked_items[:k], start=1):
        if item in held_out:
            dcg += 1.0 / math.log2(pos + 1)
    ideal = sum(
        1.0 / math.log2(pos + 1)
        for pos in range(1, min(k, len(held_out)) + 1)
    )
    return dcg / ideal


_METRIC_FUNCS = {"recall": recall_at_k, "ndcg": ndcg_at_k}


def parse_metric(spec: str) -> tuple[str, int]:
    """Parse ``recall@20`` style strings into (name, k)."""
    try:
        name, k_str = spec.strip().lower().split("@")
        k = int(k_str)
    except ValueError:
        raise ValueError(f"bad metric spec {spec!r}; expected e.g. recall@20") from None
    if name not in _METRIC_FUNCS:
        raise ValueError(f"unknown metric {name!r}; expected one of {METRIC_NAMES}")
    if k < 1:
        raise ValueError(f"metric k must be >= 1, got {k}")
    return name, k


class PopularityScorer:
    """Every user gets the same scores: per-item training interaction counts."""

    def __init__(self, train: InteractionMatrix):
        self.counts = train.item_counts().astype(np.float64)
        self.n_items = train.n_items
        self._vocab_hash = train.items.sha256()

    def vocab_hash(self) -> bytes:
        return self._vocab_hash

    def score(self, item_indices, values) -> np.ndarray:
        return self.counts.copy()


class CosineItemScorer:
    """Item-item cosine similarity over the co-occurrence Gram, zero diagonal.

    C[i, j] = G[i, j] / sqrt(G[i, i] * G[j, j]), zero where either item has
    no interactions. Scores are the history vector times C.
    """

    def __init__(self, train: InteractionMatrix):
        gram = build_gram(train, "cooccurrence")
        diag = np.diag(gram.values).copy()
        norm = np.sqrt(np.outer(diag, diag))
        with np.errstate(divide="ignore", invalid="ignore"):
            sim = np.where(norm > 0, gram.values / norm, 0.0)
        np.fill_diagonal(sim, 0.0)
        self.similarity = sim
        self.n_items = train.n_items
        self._vocab_hash = train.items.sha256()

    def vocab_hash(self) -> bytes:
        return self._vocab_hash

    def score(self, item_indices, values) -> np.ndarray:
        if len(item_indices) == 0:
            return np.zeros(self.n_items)
        return np.asarray(values, dtype=np.float64) @ self.similarity[item_indices]


class ModelScorer:
    """Adapter giving a trained weight model the common scorer interface."""

    def __init__(self, model: WeightModel):
        self.model = model
        self.n_items = model.n_items

    def vocab_hash(self) -> bytes:
        return self.model.vocab_hash()

    def score(self, item_indices, values) -> np.ndarray:
        return score_user(item_indices, values, self.model)


def evaluate(
    scorer,
    split: EvalSplit,
    metrics: Sequence[str | tuple[str, int]],
    part: str = "test",
    keep_per_user: bool = False,
) -> list[MetricReport]:
    """Score, rank, and aggregate metrics over a split's evaluation users.

    ``scorer`` is a WeightModel or any object with ``score``/``n_items``/
    ``vocab_hash``. Per user: score from the fold-in history, exclude the
    fold-in items, rank, and compute each requested metric. Aggregates the
    per-user mean with its standard error (sample std / sqrt(n)).
    """
    if isinstance(scorer, WeightModel):
        scorer = ModelScorer(scorer)
    if scorer.vocab_hash() != split.train.items.sha256():
        raise VocabMismatchError(
            "scorer and split were built on different item vocabularies"
        )
    if part not in ("test", "validation"):
        raise ValueError(f"part must be 'test' or 'validation', got {part!r}")
    users = split.test if part == "test" else split.validation
    if not users:
        raise EaseError(f"split has zero evaluable users in part {part!r}")

    parsed = [parse_metric(m) if isinstance(m, str) else m for m in metrics]
    max_k = max(k for _, k in parsed)
    per_metric = [np.empty(len(users)) for _ in parsed]
    for i, eu in enumerate(users):
        scores = scorer.score(eu.fold_in_items, eu.fold_in_values)
        items, _ = top_k(scores, eu.fold_in_items, max_k)
        fold_in = set(int(x) for x in eu.fold_in_items)
        assert not fold_in.intersection(int(x) for x in items), (
            f"fold-in item recommended for user {eu.user_id!r}"
        )
        ranked = [int(x) for x in items]
        held = set(int(x) for x in eu.held_out_items)
        for m, (name, k) in enumerate(parsed):
            per_metric[m][i] = _METRIC_FUNCS[name](ranked, held, k)

    reports = []
    for (name, k), values in zip(parsed, per_metric):
        n = len(values)
        stderr = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        reports.append(MetricReport(
            metric=name,
            k=k,
            mean=float(values.mean()),
            std_error=stderr,
            n_users=n,
            per_user=values if keep_per_user else None,
        ))
    return reports


def weight_histogram(
    model: WeightModel, n_bins: int = 101
) -> tuple[np.ndarray, np.ndarray, float]:
    """Histogram of off-diagonal weights plus the negative fraction.

    Returns (bin_edges, counts, negative_fraction).
    """
    n = model.n_items
    off = model.B[~np.eye(n, dtype=bool)]
    counts, edges = np.histogram(off, bins=n_bins)
    negative = int(np.count_nonzero(off < 0))
    fraction = negative / off.size if off.size else 0.0
    return edges, counts, fraction


def rec_count_curve(batch: Iterable[RankedList], n_items: int) -> np.ndarray:
    """Per-item recommendation counts sorted descending (long-tail curve)."""
    counts = np.zeros(n_items, dtype=np.int64)
    for ranked in batch:
        counts[ranked.items] += 1
    return np.sort(counts)[::-1]


def report_to_dict(
    reports: Sequence[MetricReport],
    model_name: str,
    dataset: str,
    split_info: dict,
) -> dict:
    """The JSON report schema used by the CLI."""
    return {
        "model": model_name,
        "dataset": dataset,
        "split": split_info,
        "metrics": [
            {
                "name": r.name,
                "k": r.k,
                "mean": r.mean,
                "stderr": r.std_error,
                "n_users": r.n_users,
            }
            for r in reports
        ],
    }


def format_report_table(reports: Sequence[MetricReport]) -> str:
    """Aligned plain-text metric table."""
    rows = [("metric", "mean", "stderr", "n_users")]
    for r in reports:
        rows.append((r.name, f"{r.mean:.4f}", f"{r.std_error:.4f}", str(r.n_users)))
    widths = [max(len(row[c]) for row in rows) for c in range(4)]
    lines = []
    for row in rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return "\n".join(lines)


def compare_reference(
    reports: Sequence[MetricReport], dataset: str, model_name: str
) -> list[str]:
    """Deltas against published results, as printable lines."""
    try:
        expected = REFERENCE_RESULTS[dataset][model_name]
    except KeyError:
        raise ValueError(
            f"no reference results for model {model_name!r} on dataset {dataset!r}; "
            f"known datasets: {sorted(REFERENCE_RESULTS)}"
        ) from None
    lines = []
    for r in reports:
        if r.name in expected:
            ref = expected[r.name]
            lines.append(
                f"{r.name}: got {r.mean:.4f}, reference {ref:.4f}, "
                f"delta {r.mean - ref:+.4f}"
            )
    return lines


def report_round_trip(report: dict) -> dict:
    """JSON-serialize and parse a report dict (schema sanity helper)."""
    return json.loads(json.dumps(report))
