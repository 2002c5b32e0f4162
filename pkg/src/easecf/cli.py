"""Command-line pipeline: ingest -> split -> train -> evaluate -> recommend / inspect.

Stages communicate through files so that the expensive Gram computation
can be handed off to external systems and re-used across lambda values.
Every command is deterministic given its flags and seed. Exit codes: 0
success, 2 usage error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .errors import EaseError
from .evaluation import (
    CosineItemScorer,
    ModelScorer,
    PopularityScorer,
    compare_reference,
    evaluate,
    format_report_table,
    rec_count_curve,
    report_to_dict,
    weight_histogram,
)
from .gram import GRAM_MODES, build_gram, load_gram, save_gram
from .interactions import ingest_path, load_matrix, save_matrix
from .ranking import format_ranked_lines, recommend_batch
from .solver import clamp_nonneg, load_model, save_model, solve
from .splits import load_split, save_split, split_strong, split_weak


class UsageError(Exception):
    pass


def _thread_limit(threads: int | None):
    """Context manager capping BLAS parallelism; EASE_THREADS is the fallback."""
    from threadpoolctl import threadpool_limits

    if threads is None:
        env = os.environ.get("EASE_THREADS")
        threads = int(env) if env else None
    if threads is not None and threads < 1:
        raise UsageError("--threads must be >= 1")
    return threadpool_limits(limits=threads)


def _add_version(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ease",
        description="Item-item collaborative filtering with a closed-form solver.",
    )
    _add_version(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse an interaction log into the canonical matrix format")
    _add_version(p)
    p.add_argument("--input", required=True, help="delimited interaction file")
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--min-user-activity", type=int, default=0, metavar="N")
    p.add_argument("--min-item-activity", type=int, default=0, metavar="N")
    p.add_argument("--binarize", action="store_true")
    p.add_argument("--value-threshold", type=float, default=None, metavar="F",
                   help="drop interactions with value below F")
    p.add_argument("--delimiter", default=None, metavar="CHAR")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("split", help="generate an evaluation split")
    _add_version(p)
    p.add_argument("--matrix", required=True, help="canonical matrix directory")
    p.add_argument("--output", required=True, help="split output directory")
    p.add_argument("--mode", choices=("strong", "weak"), required=True)
    p.add_argument("--val-users", type=int, default=0, metavar="N")
    p.add_argument("--test-users", type=int, default=0, metavar="N")
    p.add_argument("--fold-in-frac", type=float, default=0.8, metavar="F")
    p.add_argument("--train-frac", type=float, default=0.3, metavar="F")
    p.add_argument("--seed", type=int, required=True, metavar="S")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a weight model")
    _add_version(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--matrix", help="canonical matrix directory")
    src.add_argument("--split", help="split directory (train part)")
    src.add_argument("--gram", help="precomputed gram file")
    p.add_argument("--output", required=True, help="model file path")
    p.add_argument("--lambda", dest="lam", type=float, required=True, metavar="F")
    p.add_argument("--gram-mode", choices=GRAM_MODES, default="cooccurrence")
    p.add_argument("--clamp-nonneg", action="store_true",
                   help="zero out negative weights after solving")
    p.add_argument("--save-gram", default=None, metavar="PATH",
                   help="also persist the gram matrix")
    p.add_argument("--threads", type=int, default=None, metavar="N")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="compute ranking metrics on a split")
    _add_version(p)
    p.add_argument("--split", required=True)
    who = p.add_mutually_exclusive_group(required=True)
    who.add_argument("--model", help="model file")
    who.add_argument("--baseline", choices=("popularity", "cosine"))
    p.add_argument("--metrics", default="recall@20,recall@50,ndcg@100",
                   help="comma-separated, e.g. recall@20,ndcg@100")
    p.add_argument("--part", choices=("test", "validation"), default="test")
    p.add_argument("--dataset", default=None, help="dataset label for the report")
    p.add_argument("--report", default=None, metavar="PATH", help="write JSON report here")
    p.add_argument("--compare-reference", default=None, metavar="DATASET",
                   help="print deltas against published results for DATASET")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("recommend", help="emit top-k lists")
    _add_version(p)
    p.add_argument("--model", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--split", help="score the split's eval users from their fold-in")
    src.add_argument("--matrix", help="score every user of a canonical matrix")
    p.add_argument("--part", choices=("test", "validation"), default="test")
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--include-history", action="store_true",
                   help="do not exclude already-seen items")
    p.add_argument("--output", default=None, metavar="PATH")
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("inspect", help="model diagnostics: weight histogram, rec counts")
    _add_version(p)
    p.add_argument("--model", required=True)
    p.add_argument("--weights-histogram", default=None, metavar="PATH",
                   help="write histogram CSV here")
    p.add_argument("--bins", type=int, default=101)
    p.add_argument("--rec-counts", default=None, metavar="PATH",
                   help="write per-item recommendation-count CSV here")
    p.add_argument("--split", default=None, help="split for --rec-counts")
    p.add_argument("--part", choices=("test", "validation"), default="test")
    p.add_argument("--k", type=int, default=100)
    p.set_defaults(func=cmd_inspect)

    return parser


def cmd_ingest(args) -> int:
    matrix = ingest_path(
        args.input,
        delimiter=args.delimiter,
        min_user_activity=args.min_user_activity,
        min_item_activity=args.min_item_activity,
        binarize=args.binarize,
        value_threshold=args.value_threshold,
    )
    save_matrix(matrix, args.output)
    print(f"users={matrix.n_users} items={matrix.n_items} nnz={matrix.nnz}")
    return 0


def cmd_split(args) -> int:
    matrix = load_matrix(args.matrix)
    if args.mode == "strong":
        if args.val_users <= 0 and args.test_users <= 0:
            raise UsageError("strong mode needs --val-users and/or --test-users")
        split = split_strong(
            matrix, args.val_users, args.test_users, args.fold_in_frac, args.seed
        )
    else:
        split = split_weak(matrix, args.train_frac, args.seed)
    save_split(split, args.output)
    print(
        f"mode={split.mode} train_users={split.train.n_users} "
        f"val_users={len(split.validation)} test_users={len(split.test)} "
        f"skipped={len(split.skipped)}"
    )
    return 0


def cmd_train(args) -> int:
    if args.lam <= 0:
        raise UsageError(f"--lambda must be > 0, got {args.lam}")
    with _thread_limit(args.threads):
        if args.gram:
            gram = load_gram(args.gram)
            if gram.mode != args.gram_mode:
                raise UsageError(
                    f"gram file has mode {gram.mode!r}, but --gram-mode "
                    f"{args.gram_mode!r} was requested"
                )
        else:
            matrix_dir = args.matrix or str(Path(args.split) / "train")
            matrix = load_matrix(matrix_dir)
            gram = build_gram(matrix, args.gram_mode)
            if args.save_gram:
                save_gram(gram, args.save_gram)
        model = solve(gram, args.lam)
        if args.clamp_nonneg:
            model = clamp_nonneg(model)
    save_model(model, args.output)
    print(
        f"model={args.output} items={model.n_items} lambda={model.lam:g} "
        f"gram_mode={model.gram_mode} variant={model.variant}"
    )
    return 0


def _split_info(split, part: str) -> dict:
    return {
        "mode": split.mode,
        "seed": split.seed,
        "part": part,
        "params": split.params,
        "n_train_users": split.train.n_users,
        "n_eval_users": len(split.test if part == "test" else split.validation),
    }


def cmd_evaluate(args) -> int:
    metric_specs = [m for m in args.metrics.split(",") if m.strip()]
    if not metric_specs:
        raise UsageError("no metrics given")
    split = load_split(args.split)
    if args.baseline == "popularity":
        scorer = PopularityScorer(split.train)
        model_name = "popularity"
    elif args.baseline == "cosine":
        scorer = CosineItemScorer(split.train)
        model_name = "item-item"
    else:
        model = load_model(args.model)
        scorer = ModelScorer(model)
        model_name = "ease_nonneg" if model.variant == "clamped_nonneg" else "ease"
    try:
        reports = evaluate(scorer, split, metric_specs, part=args.part)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    dataset = args.dataset or Path(args.split).name
    print(format_report_table(reports))
    payload = report_to_dict(reports, model_name, dataset, _split_info(split, args.part))
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
    if args.compare_reference:
        try:
            for line in compare_reference(reports, args.compare_reference, model_name):
                print(line)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    return 0


def _histories_from_split(split, part: str):
    users = split.test if part == "test" else split.validation
    return [(eu.user_id, eu.fold_in_items, eu.fold_in_values) for eu in users]


def _histories_from_matrix(matrix):
    out = []
    for u in range(matrix.n_users):
        indices, values = matrix.row(u)
        out.append((matrix.users[u], indices, values))
    return out


def cmd_recommend(args) -> int:
    if args.k < 1:
        raise UsageError(f"--k must be >= 1, got {args.k}")
    model = load_model(args.model)
    if args.split:
        split = load_split(args.split)
        if model.vocab_hash() != split.train.items.sha256():
            raise EaseError("model and split item vocabularies differ")
        histories = _histories_from_split(split, args.part)
        item_ids = split.train.items.ids
    else:
        matrix = load_matrix(args.matrix)
        if model.vocab_hash() != matrix.items.sha256():
            raise EaseError("model and matrix item vocabularies differ")
        histories = _histories_from_matrix(matrix)
        item_ids = matrix.items.ids
    batch = recommend_batch(
        histories, model, args.k, exclude_history=not args.include_history
    )
    lines = format_ranked_lines(batch, item_ids)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            for line in lines:
                fh.write(line + "\n")
    else:
        for line in lines:
            print(line)
    return 0


def cmd_inspect(args) -> int:
    model = load_model(args.model)
    edges, counts, negative_fraction = weight_histogram(model, args.bins)
    print(f"negative_fraction={negative_fraction:.4f}")
    if args.weights_histogram:
        with open(args.weights_histogram, "w", encoding="utf-8") as fh:
            fh.write("bin_lo,bin_hi,count\n")
            for lo, hi, c in zip(edges[:-1], edges[1:], counts):
                fh.write(f"{lo!r},{hi!r},{c}\n")
    if args.rec_counts:
        if not args.split:
            raise UsageError("--rec-counts requires --split")
        split = load_split(args.split)
        if model.vocab_hash() != split.train.items.sha256():
            raise EaseError("model and split item vocabularies differ")
        batch = recommend_batch(
            _histories_from_split(split, args.part), model, args.k
        )
        curve = rec_count_curve(batch, model.n_items)
        with open(args.rec_counts, "w", encoding="utf-8") as fh:
            fh.write("rank,count\n")
            for rank, count in enumerate(curve, start=1):
                fh.write(f"{rank},{count}\n")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (EaseError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
