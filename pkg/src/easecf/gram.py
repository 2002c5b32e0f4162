"""Dense item-item Gram matrices from sparse interaction data.

The Gram matrix is the sufficient statistic for the closed-form solver:
for binary data it is the item co-occurrence count matrix, and its
entries are exact integers in 64-bit floats. Column transforms produce a
covariance-proportional (``centered``) or correlation (``standardized``)
variant without ever densifying the interaction matrix, via the expansion
(X - 1 mu^T)^T (X - 1 mu^T) = X^T X - n mu mu^T.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ZeroVarianceError
from .interactions import InteractionMatrix, Vocabulary

GRAM_MODES = ("cooccurrence", "centered", "standardized")

# rows per block when accumulating X^T X; bounds peak sparse temporaries
_BLOCK_ROWS = 65536


@dataclass
class GramMatrix:
    """Symmetric item-item Gram matrix plus the transform metadata."""

    values: np.ndarray
    mode: str
    n_users_used: int
    items: Vocabulary
    column_means: np.ndarray | None = None
    column_stds: np.ndarray | None = None

    @property
    def n_items(self) -> int:
        return self.values.shape[0]

    def vocab_hash(self) -> bytes:
        return self.items.sha256()


def _mirror_upper(g: np.ndarray) -> np.ndarray:
    """Copy the upper triangle onto the lower one for bit-exact symmetry."""
    upper = np.triu(g)
    return upper + np.triu(g, 1).T


def build_gram(X: InteractionMatrix, mode: str = "cooccurrence") -> GramMatrix:
    """Compute G = X^T X with the requested column transform.

    ``centered`` subtracts column means (covariance-proportional),
    ``standardized`` additionally divides by the population column
    standard deviations (correlation-proportional). A zero-variance item
    cannot be standardized and raises :class:`ZeroVarianceError`.
    """
    if mode not in GRAM_MODES:
        raise ValueError(f"unknown gram mode {mode!r}")
    n_items = X.n_items
    n_users = X.n_users
    g = np.zeros((n_items, n_items), dtype=np.float64)
    for start in range(0, n_users, _BLOCK_ROWS):
        block = X.csr[start : start + _BLOCK_ROWS]
        g += (block.T @ block).toarray()
    g = _mirror_upper(g)

    if mode == "cooccurrence":
        return GramMatrix(g, mode, n_users, X.items)

    means = X.column_sums() / n_users
    g -= n_users * np.outer(means, means)
    if mode == "centered":
        return GramMatrix(g, mode, n_users, X.items, column_means=means)

    variances = np.diag(g) / n_users
    zero = np.flatnonzero(variances <= 0)
    if zero.size:
        raise ZeroVarianceError(
            f"item {X.items[int(zero[0])]!r} has zero variance; "
            "cannot standardize"
        )
    stds = np.sqrt(variances)
    g /= np.outer(stds, stds)
    return GramMatrix(
        g, mode, n_users, X.items, column_means=means, column_stds=stds
    )


def merge_grams(parts: list[GramMatrix]) -> GramMatrix:
    """Entrywise sum of co-occurrence Grams built on user shards.

    Only ``cooccurrence`` merges exactly (means and stds are not additive
    across shards). All parts must share the item vocabulary.
    """
    if not parts:
        raise ValueError("no gram matrices to merge")
    first = parts[0]
    ref_hash = first.vocab_hash()
    for p in parts:
        if p.mode != "cooccurrence":
            raise ValueError(
                f"cannot merge gram with mode {p.mode!r}; only cooccurrence "
                "parts are additive"
            )
        if p.n_items != first.n_items or p.vocab_hash() != ref_hash:
            raise ValueError("gram parts disagree on the item vocabulary")
    total = np.zeros_like(first.values)
    n_users = 0
    for p in parts:
        total += p.values
        n_users += p.n_users_used
    return GramMatrix(total, "cooccurrence", n_users, first.items)


def save_gram(gram: GramMatrix, path: str | os.PathLike) -> Path:
    """Write a Gram file: one-line JSON header + row-major little-endian f64 payload.

    The item ID list goes to a ``<path>.vocab.json`` sidecar so a model can
    be trained from the Gram file alone.
    """
    path = Path(path)
    header = {
        "format": "ease-gram",
        "version": 1,
        "n_items": gram.n_items,
        "mode": gram.mode,
        "n_users_used": gram.n_users_used,
        "vocab_sha256": gram.items.sha256_hex(),
    }
    if gram.column_means is not None:
        header["column_means"] = gram.column_means.tolist()
    if gram.column_stds is not None:
        header["column_stds"] = gram.column_stds.tolist()
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(gram.values, dtype="<f8").tobytes())
    with open(_vocab_sidecar(path), "w", encoding="utf-8") as fh:
        json.dump({"items": list(gram.items.ids)}, fh)
    return path


def load_gram(path: str | os.PathLike) -> GramMatrix:
    path = Path(path)
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError:
            raise FormatError(f"{path}: not a gram file") from None
        if header.get("format") != "ease-gram":
            raise FormatError(f"{path}: not a gram file")
        if header.get("version") != 1:
            raise FormatError(f"{path}: unsupported version {header.get('version')}")
        n = int(header["n_items"])
        payload = fh.read(n * n * 8)
        if len(payload) != n * n * 8:
            raise FormatError(f"{path}: truncated payload")
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(n, n)
    with open(_vocab_sidecar(path), "r", encoding="utf-8") as fh:
        items = Vocabulary(tuple(json.load(fh)["items"]))
    if items.sha256_hex() != header["vocab_sha256"]:
        raise FormatError(f"{path}: vocab sidecar does not match header hash")
    means = header.get("column_means")
    stds = header.get("column_stds")
    return GramMatrix(
        values,
        header["mode"],
        int(header["n_users_used"]),
        items,
        column_means=None if means is None else np.asarray(means, dtype=np.float64),
        column_stds=None if stds is None else np.asarray(stds, dtype=np.float64),
    )


def _vocab_sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".vocab.json")
