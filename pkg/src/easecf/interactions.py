"""Sparse user-item interaction matrices: ingestion, filtering, and canonical file I/O.

Interactions are implicit feedback: a stored entry means "interaction
observed" and must be positive; absence means zero. User and item IDs are
opaque strings mapped to dense indices in order of first appearance.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import EmptyDatasetError, FormatError, IngestError

MATRIX_FILENAME = "interactions.txt"
VOCAB_FILENAME = "vocab.json"

_HEADER_WORDS = {
    "user", "userid", "user_id", "uid",
    "item", "itemid", "item_id", "iid",
    "movie", "movieid", "movie_id",
    "song", "songid", "song_id", "track",
    "rating", "value", "count", "play_count",
    "timestamp", "time", "ts", "date",
}


@dataclass(frozen=True)
class Vocabulary:
    """Bijection between external string IDs and dense indices 0..n-1."""

    ids: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.ids)

    def __getitem__(self, index: int) -> str:
        return self.ids[index]

    @property
    def index(self) -> dict[str, int]:
        # built lazily; frozen dataclass, so cache via object.__setattr__
        cached = self.__dict__.get("_index")
        if cached is None:
            cached = {v: i for i, v in enumerate(self.ids)}
            object.__setattr__(self, "_index", cached)
        return cached

    def sha256(self) -> bytes:
        h = hashlib.sha256()
        for v in self.ids:
            h.update(v.encode("utf-8"))
            h.update(b"\n")
        return h.digest()

    def sha256_hex(self) -> str:
        return self.sha256().hex()


class InteractionMatrix:
    """Immutable sparse user x item matrix with ID vocabularies.

    Rows are stored in CSR form with strictly increasing item indices per
    user and positive values. Duplicate (user, item) pairs are not allowed.
    """

    def __init__(self, csr: sp.csr_matrix, users: Vocabulary, items: Vocabulary):
        csr = csr.tocsr()
        csr.sort_indices()
        if csr.shape != (len(users), len(items)):
            raise ValueError(
                f"matrix shape {csr.shape} does not match vocab sizes "
                f"({len(users)}, {len(items)})"
            )
        if csr.nnz and not np.all(csr.data > 0):
            raise ValueError("interaction values must be positive")
        self.csr = csr
        self.users = users
        self.items = items

    @property
    def n_users(self) -> int:
        return self.csr.shape[0]

    @property
    def n_items(self) -> int:
        return self.csr.shape[1]

    @property
    def nnz(self) -> int:
        return int(self.csr.nnz)

    def row(self, u: int) -> tuple[np.ndarray, np.ndarray]:
        """Item indices and values of user ``u``, sorted by item index."""
        lo, hi = self.csr.indptr[u], self.csr.indptr[u + 1]
        return self.csr.indices[lo:hi], self.csr.data[lo:hi]

    def item_counts(self) -> np.ndarray:
        """Number of users who interacted with each item."""
        return np.bincount(self.csr.indices, minlength=self.n_items)

    def user_counts(self) -> np.ndarray:
        return np.diff(self.csr.indptr)

    def column_sums(self) -> np.ndarray:
        return np.asarray(self.csr.sum(axis=0)).ravel()

    @classmethod
    def from_dense(
        cls,
        dense,
        user_ids: Sequence[str] | None = None,
        item_ids: Sequence[str] | None = None,
    ) -> "InteractionMatrix":
        dense = np.asarray(dense, dtype=np.float64)
        n_users, n_items = dense.shape
        if user_ids is None:
            user_ids = [f"u{i}" for i in range(n_users)]
        if item_ids is None:
            item_ids = [f"i{j}" for j in range(n_items)]
        csr = sp.csr_matrix(dense)
        csr.eliminate_zeros()
        return cls(csr, Vocabulary(tuple(user_ids)), Vocabulary(tuple(item_ids)))

    def toarray(self) -> np.ndarray:
        return self.csr.toarray()

    def __eq__(self, other) -> bool:
        if not isinstance(other, InteractionMatrix):
            return NotImplemented
        return (
            self.users.ids == other.users.ids
            and self.items.ids == other.items.ids
            and self.csr.shape == other.csr.shape
            and np.array_equal(self.csr.indptr, other.csr.indptr)
            and np.array_equal(self.csr.indices, other.csr.indices)
            and np.array_equal(self.csr.data, other.csr.data)
        )

    def __repr__(self) -> str:
        return (
            f"InteractionMatrix(n_users={self.n_users}, "
            f"n_items={self.n_items}, nnz={self.nnz})"
        )


def _looks_like_header(fields: list[str]) -> bool:
    if any(f.strip().lower() in _HEADER_WORDS for f in fields):
        return True
    if len(fields) >= 3:
        try:
            float(fields[2])
        except ValueError:
            return True
    return False


def read_interactions(
    source: str | os.PathLike | Iterable[str],
    delimiter: str | None = None,
) -> Iterator[tuple[str, str, float]]:
    """Parse delimited interaction lines into (user_id, item_id, value) records.

    ``source`` is a path or an iterable of lines. Each line holds
    ``user<sep>item[<sep>value][<sep>timestamp]`` with tab or comma
    separators (auto-detected from the first line unless ``delimiter``
    is given). A header line is skipped when detected. Timestamps are
    accepted and ignored. Malformed lines raise :class:`IngestError`
    with their line number.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as fh:
            yield from read_interactions(fh, delimiter)
        return

    sep = delimiter
    first = True
    for line_no, line in enumerate(source, start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        if sep is None:
            sep = "\t" if "\t" in line else ","
        fields = line.split(sep)
        if first:
            first = False
            if _looks_like_header(fields):
                continue
        if not 2 <= len(fields) <= 4:
            raise IngestError(line_no, f"expected 2-4 fields, got {len(fields)}")
        user, item = fields[0].strip(), fields[1].strip()
        if not user or not item:
            raise IngestError(line_no, "empty user or item id")
        value = 1.0
        if len(fields) >= 3 and fields[2].strip():
            try:
                value = float(fields[2])
            except ValueError:
                raise IngestError(line_no, f"bad value field {fields[2]!r}") from None
            if not np.isfinite(value):
                raise IngestError(line_no, f"non-finite value {fields[2]!r}")
            if value <= 0:
                raise IngestError(line_no, f"non-positive value {value!r}")
        yield user, item, value


def ingest(
    records: Iterable[tuple],
    *,
    min_user_activity: int = 0,
    min_item_activity: int = 0,
    binarize: bool = False,
    value_threshold: float | None = None,
) -> InteractionMatrix:
    """Build an interaction matrix from (user, item[, value[, timestamp]]) records.

    Duplicates collapse to the maximum value. ``value_threshold`` drops
    records with value below the threshold. Activity filters are applied
    iteratively until a fixpoint: dropping low-activity items can push
    users below their threshold and vice versa. Raises
    :class:`EmptyDatasetError` when nothing survives.
    """
    if min_user_activity < 0 or min_item_activity < 0:
        raise ValueError("activity thresholds must be >= 0")

    user_index: dict[str, int] = {}
    item_index: dict[str, int] = {}
    u_list: list[int] = []
    i_list: list[int] = []
    v_list: list[float] = []
    for rec in records:
        user, item = str(rec[0]), str(rec[1])
        value = float(rec[2]) if len(rec) >= 3 and rec[2] is not None else 1.0
        if value <= 0:
            raise ValueError(f"non-positive interaction value {value!r}")
        u_list.append(user_index.setdefault(user, len(user_index)))
        i_list.append(item_index.setdefault(item, len(item_index)))
        v_list.append(value)

    if not u_list:
        raise EmptyDatasetError("no interactions in input")

    users = np.asarray(u_list, dtype=np.int64)
    items = np.asarray(i_list, dtype=np.int64)
    values = np.asarray(v_list, dtype=np.float64)
    n_users = len(user_index)
    n_items = len(item_index)

    # collapse duplicates keeping the max value (order-independent)
    key = users * n_items + items
    uniq, inverse = np.unique(key, return_inverse=True)
    merged = np.full(len(uniq), -np.inf)
    np.maximum.at(merged, inverse, values)
    users = (uniq // n_items).astype(np.int64)
    items = (uniq % n_items).astype(np.int64)
    values = merged

    if value_threshold is not None:
        keep = values >= value_threshold
        users, items, values = users[keep], items[keep], values[keep]

    # iterate the activity filters to a fixpoint
    while users.size:
        u_counts = np.bincount(users, minlength=n_users)
        i_counts = np.bincount(items, minlength=n_items)
        keep = (u_counts[users] >= min_user_activity) & (
            i_counts[items] >= min_item_activity
        )
        if keep.all():
            break
        users, items, values = users[keep], items[keep], values[keep]

    if not users.size:
        raise EmptyDatasetError("no interactions remain after filtering")

    if binarize:
        values = np.ones_like(values)

    kept_users = np.unique(users)
    kept_items = np.unique(items)
    user_ids = list(user_index)
    item_ids = list(item_index)
    user_vocab = Vocabulary(tuple(user_ids[i] for i in kept_users))
    item_vocab = Vocabulary(tuple(item_ids[i] for i in kept_items))
    users = np.searchsorted(kept_users, users)
    items = np.searchsorted(kept_items, items)

    csr = sp.csr_matrix(
        (values, (users, items)), shape=(len(user_vocab), len(item_vocab))
    )
    return InteractionMatrix(csr, user_vocab, item_vocab)


def ingest_path(
    path: str | os.PathLike,
    *,
    delimiter: str | None = None,
    **filters,
) -> InteractionMatrix:
    """Read a delimited interaction file and apply :func:`ingest` filters."""
    return ingest(read_interactions(path, delimiter), **filters)


def save_matrix(matrix: InteractionMatrix, directory: str | os.PathLike) -> Path:
    """Write the canonical text format plus the JSON vocab sidecar.

    Layout: ``interactions.txt`` holding a ``# users=N items=M nnz=K``
    header followed by sorted ``user_idx item_idx value`` triples, and
    ``vocab.json`` with the ID lists. Values are written with
    round-trip-exact float formatting.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    coo = matrix.csr.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(directory / MATRIX_FILENAME, "w", encoding="utf-8") as fh:
        fh.write(
            f"# users={matrix.n_users} items={matrix.n_items} nnz={matrix.nnz}\n"
        )
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{r} {c} {float(v)!r}\n")
    with open(directory / VOCAB_FILENAME, "w", encoding="utf-8") as fh:
        json.dump(
            {"users": list(matrix.users.ids), "items": list(matrix.items.ids)},
            fh,
        )
    return directory


def load_matrix(directory: str | os.PathLike) -> InteractionMatrix:
    """Read a matrix written by :func:`save_matrix` (bit-exact round trip)."""
    directory = Path(directory)
    path = directory / MATRIX_FILENAME
    with open(directory / VOCAB_FILENAME, "r", encoding="utf-8") as fh:
        vocab = json.load(fh)
    users = Vocabulary(tuple(vocab["users"]))
    items = Vocabulary(tuple(vocab["items"]))
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("# users="):
            raise FormatError(f"{path}: missing canonical header")
        parts = dict(p.split("=") for p in header[2:].split())
        n_users, n_items, nnz = (
            int(parts["users"]), int(parts["items"]), int(parts["nnz"]),
        )
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz, dtype=np.float64)
        for k in range(nnz):
            fields = fh.readline().split()
            if len(fields) != 3:
                raise FormatError(f"{path}: truncated at entry {k}")
            rows[k], cols[k], vals[k] = int(fields[0]), int(fields[1]), float(fields[2])
    if (n_users, n_items) != (len(users), len(items)):
        raise FormatError(f"{path}: header counts do not match vocab sizes")
    csr = sp.csr_matrix((vals, (rows, cols)), shape=(n_users, n_items))
    if csr.nnz != nnz:
        raise FormatError(f"{path}: duplicate entries in canonical file")
    return InteractionMatrix(csr, users, items)
