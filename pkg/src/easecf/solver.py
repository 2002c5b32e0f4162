"""Closed-form training of the zero-diagonal item-item weight matrix.

The model minimizes ||X - XB||_F^2 + lambda ||B||_F^2 subject to
diag(B) = 0. Enforcing the constraint with Lagrangian multipliers gives a
closed form: with P = (G + lambda I)^{-1} for the Gram matrix G = X^T X,

    B[i, j] = -P[i, j] / P[j, j]   (i != j),   B[j, j] = 0.

The per-item multipliers come out as 1 / diag(P). Since lambda > 0 and G
is positive semidefinite, G + lambda I is symmetric positive definite and
is inverted through a Cholesky factorization.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import lapack

from .errors import FactorizationError, FormatError
from .gram import GramMatrix
from .interactions import Vocabulary

MODEL_MAGIC = b"EASR"
MODEL_VERSION = 1
_MODEL_HEADER = struct.Struct("<4sIQdBB32s")
_GRAM_MODE_CODES = {"cooccurrence": 0, "centered": 1, "standardized": 2}
_VARIANT_CODES = {"full": 0, "clamped_nonneg": 1}
_GRAM_MODE_NAMES = {v: k for k, v in _GRAM_MODE_CODES.items()}
_VARIANT_NAMES = {v: k for k, v in _VARIANT_CODES.items()}


@dataclass(eq=False)
class WeightModel:
    """Trained item-item weight matrix with an exactly zero diagonal."""

    B: np.ndarray
    lam: float
    gram_mode: str
    items: Vocabulary
    variant: str = "full"
    column_means: np.ndarray | None = None
    column_stds: np.ndarray | None = None
    _score_shift: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_items(self) -> int:
        return self.B.shape[0]

    def vocab_hash(self) -> bytes:
        return self.items.sha256()

    def score_shift(self) -> np.ndarray | None:
        """Constant score offset from the column transform, or None.

        For centered/standardized Grams the fold-in vector is shifted by
        the column means before the product; the shift contributes the
        fixed term -(mu / sigma) . B to every user's scores. Cached after
        the first call (the model is immutable).
        """
        if self.gram_mode == "cooccurrence":
            return None
        if self._score_shift is None:
            w = self.column_means
            if self.gram_mode == "standardized":
                w = w / self.column_stds
            self._score_shift = -(w @ self.B)
        return self._score_shift


@dataclass(frozen=True)
class SolveDiagnostics:
    """Solver internals: the multipliers, factorization pivot, weight signs."""

    gamma_tilde: np.ndarray
    min_pivot: float
    negative_fraction: float


def _regularized(gram_values: np.ndarray, lam: float) -> np.ndarray:
    """G + lam I as a fresh Fortran-ordered array (consumed by LAPACK in place)."""
    n = gram_values.shape[0]
    a = np.asfortranarray(gram_values)
    if a is gram_values:  # asfortranarray may return the input itself
        a = a.copy(order="F")
    a.flat[:: n + 1] += lam
    return a


def _invert_spd(a: np.ndarray) -> tuple[np.ndarray, float]:
    """Invert a symmetric positive definite matrix via Cholesky, in place.

    Returns the full symmetric inverse and the smallest pivot (squared
    diagonal of the Cholesky factor). Raises
    :class:`FactorizationError` when the matrix is numerically indefinite.
    """
    factor, info = lapack.dpotrf(a, lower=1, clean=0, overwrite_a=1)
    if info != 0:
        smallest = float(np.linalg.eigvalsh(a).min())
        raise FactorizationError(
            f"matrix is not positive definite (leading minor {info}, "
            f"smallest pivot {smallest:.6e})"
        )
    pivots = np.diag(factor) ** 2
    inverse, info = lapack.dpotri(factor, lower=1, overwrite_c=1)
    if info != 0:
        raise FactorizationError(f"inversion failed (lapack info {info})")
    # only the lower triangle holds the inverse; mirror it row by row
    n = inverse.shape[0]
    for i in range(n - 1):
        inverse[i, i + 1 :] = inverse[i + 1 :, i]
    return inverse, float(pivots.min())


def _weights_from_precision(p: np.ndarray) -> np.ndarray:
    """Divide each column by minus its diagonal entry; zero the diagonal."""
    b = p / (-np.diag(p))[np.newaxis, :]
    np.fill_diagonal(b, 0.0)
    return b


def solve(gram: GramMatrix, lam: float) -> WeightModel:
    """Compute the optimal zero-diagonal weight matrix for the given lambda.

    The input Gram is not modified. ``lam`` must be strictly positive;
    this guarantees positive definiteness and keeps the per-column
    division well defined.
    """
    if lam <= 0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    p, _ = _invert_spd(_regularized(gram.values, lam))
    b = _weights_from_precision(p)
    return WeightModel(
        B=b,
        lam=float(lam),
        gram_mode=gram.mode,
        items=gram.items,
        column_means=None if gram.column_means is None else gram.column_means.copy(),
        column_stds=None if gram.column_stds is None else gram.column_stds.copy(),
    )


def solve_diagnostics(gram: GramMatrix, lam: float) -> SolveDiagnostics:
    """Solve and report the multipliers 1/diag(P), the smallest Cholesky
    pivot, and the fraction of strictly negative off-diagonal weights."""
    if lam <= 0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    p, min_pivot = _invert_spd(_regularized(gram.values, lam))
    gamma_tilde = 1.0 / np.diag(p)
    b = _weights_from_precision(p)
    n = b.shape[0]
    off_diag = n * (n - 1)
    negative = int(np.count_nonzero(b < 0))
    fraction = negative / off_diag if off_diag else 0.0
    return SolveDiagnostics(gamma_tilde, min_pivot, fraction)


def clamp_nonneg(model: WeightModel) -> WeightModel:
    """Return a copy with negative weights set to zero (the >=0 variant)."""
    if model.variant != "full":
        raise ValueError(f"expected a full model, got variant {model.variant!r}")
    return WeightModel(
        B=np.maximum(model.B, 0.0),
        lam=model.lam,
        gram_mode=model.gram_mode,
        items=model.items,
        variant="clamped_nonneg",
        column_means=model.column_means,
        column_stds=model.column_stds,
    )


def save_model(model: WeightModel, path: str | os.PathLike) -> Path:
    """Write the binary model file plus its JSON vocab sidecar.

    Layout: magic ``EASR``, u32 format version, u64 item count, f64
    lambda, u8 gram mode, u8 variant, 32-byte vocab hash, then the weight
    matrix row-major as little-endian f64. Column means/stds (when the
    gram mode needs them) live in the sidecar next to the item IDs.
    """
    path = Path(path)
    header = _MODEL_HEADER.pack(
        MODEL_MAGIC,
        MODEL_VERSION,
        model.n_items,
        model.lam,
        _GRAM_MODE_CODES[model.gram_mode],
        _VARIANT_CODES[model.variant],
        model.vocab_hash(),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(model.B, dtype="<f8").tobytes())
    sidecar = {"items": list(model.items.ids)}
    if model.column_means is not None:
        sidecar["column_means"] = model.column_means.tolist()
    if model.column_stds is not None:
        sidecar["column_stds"] = model.column_stds.tolist()
    with open(_vocab_sidecar(path), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh)
    return path


def load_model(path: str | os.PathLike) -> WeightModel:
    path = Path(path)
    with open(path, "rb") as fh:
        raw = fh.read(_MODEL_HEADER.size)
        if len(raw) < _MODEL_HEADER.size:
            raise FormatError(f"{path}: truncated header")
        magic, version, n_items, lam, mode_code, variant_code, vocab_hash = (
            _MODEL_HEADER.unpack(raw)
        )
        if magic != MODEL_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        if version != MODEL_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        if mode_code not in _GRAM_MODE_NAMES or variant_code not in _VARIANT_NAMES:
            raise FormatError(f"{path}: unknown mode/variant codes")
        payload = fh.read(n_items * n_items * 8)
        if len(payload) != n_items * n_items * 8:
            raise FormatError(f"{path}: truncated payload")
    b = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(n_items, n_items)
    with open(_vocab_sidecar(path), "r", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    items = Vocabulary(tuple(sidecar["items"]))
    if items.sha256() != vocab_hash:
        raise FormatError(f"{path}: vocab sidecar does not match header hash")
    means = sidecar.get("column_means")
    stds = sidecar.get("column_stds")
    return WeightModel(
        B=b,
        lam=lam,
        gram_mode=_GRAM_MODE_NAMES[mode_code],
        items=items,
        variant=_VARIANT_NAMES[variant_code],
        column_means=None if means is None else np.asarray(means, dtype=np.float64),
        column_stds=None if stds is None else np.asarray(stds, dtype=np.float64),
    )


def _vocab_sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".vocab.json")
