"""Train/validation/test split generation for ranking evaluation.

Two protocols are supported. Strong generalization holds out whole users:
the held-out users are removed from the training matrix and each one's
history is partitioned into a fold-in part (model input at scoring time)
and a held-out part (ground truth). Weak generalization keeps every user
in training with a fraction of their items; the remainder is held out.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import FormatError
from .interactions import InteractionMatrix, Vocabulary, load_matrix, save_matrix

MANIFEST_FILENAME = "manifest.json"
TRAIN_DIRNAME = "train"


@dataclass(frozen=True)
class EvalUser:
    """One evaluated user: fold-in history plus held-out ground truth."""

    user_id: str
    fold_in_items: np.ndarray
    fold_in_values: np.ndarray
    held_out_items: np.ndarray


@dataclass
class EvalSplit:
    mode: str
    train: InteractionMatrix
    validation: list[EvalUser]
    test: list[EvalUser]
    seed: int
    skipped: list[str] = field(default_factory=list)
    params: dict = field(default_factory=dict)


def _partition_items(rng, indices, values, n_fold_in):
    perm = rng.permutation(len(indices))
    fold_sel = np.sort(perm[:n_fold_in])
    held_sel = np.sort(perm[n_fold_in:])
    return (
        indices[fold_sel].copy(),
        values[fold_sel].copy(),
        indices[held_sel].copy(),
    )


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def split_strong(
    X: InteractionMatrix,
    n_val_users: int,
    n_test_users: int,
    fold_in_fraction: float,
    seed: int,
) -> EvalSplit:
    """Hold out disjoint validation and test user sets.

    Each held-out user's items are partitioned at random: fold-in size is
    ``max(1, round(f * n))`` (half-up rounding). Users whose held-out part
    would be empty are skipped from evaluation, reported in ``skipped``,
    and retained in the training matrix. Deterministic given the seed.
    """
    if not 0 < fold_in_fraction < 1:
        raise ValueError("fold_in_fraction must be in (0, 1)")
    if n_val_users < 0 or n_test_users < 0:
        raise ValueError("user counts must be >= 0")
    if n_val_users + n_test_users >= X.n_users:
        raise ValueError(
            f"cannot hold out {n_val_users + n_test_users} of {X.n_users} users"
        )

    rng = np.random.default_rng(seed)
    drawn = rng.permutation(X.n_users)[: n_val_users + n_test_users]
    groups = {"validation": drawn[:n_val_users], "test": drawn[n_val_users:]}

    evaluated: dict[str, list[EvalUser]] = {"validation": [], "test": []}
    skipped: list[str] = []
    eval_user_set: set[int] = set()
    for name, members in groups.items():
        for u in members:
            indices, values = X.row(int(u))
            n_fold = max(1, _round_half_up(fold_in_fraction * len(indices)))
            if n_fold >= len(indices):
                skipped.append(X.users[int(u)])
                continue
            fi, fv, ho = _partition_items(rng, indices, values, n_fold)
            evaluated[name].append(
                EvalUser(X.users[int(u)], fi, fv, ho)
            )
            eval_user_set.add(int(u))

    keep = np.setdiff1d(np.arange(X.n_users), np.fromiter(eval_user_set, dtype=np.int64))
    train_csr = X.csr[keep]
    train = InteractionMatrix(
        train_csr,
        Vocabulary(tuple(X.users[int(u)] for u in keep)),
        X.items,
    )
    return EvalSplit(
        mode="strong",
        train=train,
        validation=evaluated["validation"],
        test=evaluated["test"],
        seed=seed,
        skipped=skipped,
        params={
            "n_val_users": n_val_users,
            "n_test_users": n_test_users,
            "fold_in_fraction": fold_in_fraction,
        },
    )


def split_weak(
    X: InteractionMatrix,
    train_fraction: float,
    seed: int,
) -> EvalSplit:
    """Partition each user's items; fold-in items form the training matrix.

    Fold-in size is ``floor(train_fraction * n)`` with a minimum of 1 when
    the user has at least two items. Single-item users keep their item in
    training, are excluded from evaluation, and are reported in
    ``skipped``. All evaluated users go into ``test``; ``validation`` is
    empty (run a second seed for tuning).
    """
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")

    rng = np.random.default_rng(seed)
    rows, cols, vals = [], [], []
    test: list[EvalUser] = []
    skipped: list[str] = []
    for u in range(X.n_users):
        indices, values = X.row(u)
        n_u = len(indices)
        if n_u == 1:
            rows.append(np.full(1, u))
            cols.append(indices.copy())
            vals.append(values.copy())
            skipped.append(X.users[u])
            continue
        n_fold = max(1, int(np.floor(train_fraction * n_u)))
        fi, fv, ho = _partition_items(rng, indices, values, n_fold)
        rows.append(np.full(len(fi), u))
        cols.append(fi)
        vals.append(fv)
        test.append(EvalUser(X.users[u], fi, fv, ho))

    train_csr = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(X.n_users, X.n_items),
    )
    train = InteractionMatrix(train_csr, X.users, X.items)
    return EvalSplit(
        mode="weak",
        train=train,
        validation=[],
        test=test,
        seed=seed,
        skipped=skipped,
        params={"train_fraction": train_fraction},
    )


def _write_eval_users(path: Path, users: list[EvalUser]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for eu in users:
            fh.write(json.dumps({
                "user": eu.user_id,
                "fold_in": [
                    [int(i), float(v)]
                    for i, v in zip(eu.fold_in_items, eu.fold_in_values)
                ],
                "held_out": [int(i) for i in eu.held_out_items],
            }))
            fh.write("\n")


def _read_eval_users(path: Path) -> list[EvalUser]:
    users = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            fold = rec["fold_in"]
            users.append(EvalUser(
                user_id=rec["user"],
                fold_in_items=np.array([p[0] for p in fold], dtype=np.int64),
                fold_in_values=np.array([p[1] for p in fold], dtype=np.float64),
                held_out_items=np.array(rec["held_out"], dtype=np.int64),
            ))
    return users


def save_split(split: EvalSplit, directory: str | os.PathLike) -> Path:
    """Persist a split as a directory: manifest, train matrix, eval lists."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_matrix(split.train, directory / TRAIN_DIRNAME)
    _write_eval_users(directory / "validation.jsonl", split.validation)
    _write_eval_users(directory / "test.jsonl", split.test)
    manifest = {
        "mode": split.mode,
        "seed": split.seed,
        "params": split.params,
        "skipped": split.skipped,
        "n_train_users": split.train.n_users,
        "n_items": split.train.n_items,
        "n_validation_users": len(split.validation),
        "n_test_users": len(split.test),
        "users_disjoint": _users_disjoint(split),
    }
    with open(directory / MANIFEST_FILENAME, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    return directory


def load_split(directory: str | os.PathLike) -> EvalSplit:
    directory = Path(directory)
    try:
        with open(directory / MANIFEST_FILENAME, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise FormatError(f"{directory}: not a split directory (no manifest)") from None
    train = load_matrix(directory / TRAIN_DIRNAME)
    return EvalSplit(
        mode=manifest["mode"],
        train=train,
        validation=_read_eval_users(directory / "validation.jsonl"),
        test=_read_eval_users(directory / "test.jsonl"),
        seed=manifest["seed"],
        skipped=manifest.get("skipped", []),
        params=manifest.get("params", {}),
    )


def _users_disjoint(split: EvalSplit) -> bool:
    train_users = set(split.train.users.ids)
    eval_users = {eu.user_id for eu in split.validation} | {
        eu.user_id for eu in split.test
    }
    if split.mode == "strong":
        return not (train_users & eval_users)
    return True
