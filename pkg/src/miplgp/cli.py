"""Command-line interface: synth, train, predict, eval.

Every subcommand writes a run manifest next to its primary output before any
heavy computation starts (config echo plus input hashes, no timestamps), so
an identical invocation reproduces every output byte for byte. Partial
outputs are removed when a command fails.

Exit codes: 0 success, 2 usage, 3 I/O or format, 4 numeric failure,
5 dimension mismatch.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from contextlib import contextmanager

from . import __version__
from .data import random_split, read_jsonl, write_jsonl
from .errors import DatasetFormatError, DimensionMismatchError, NumericError
from .estimator import MiplGpClassifier, write_trace_csv
from .evaluation import ALGORITHM_NAMES, make_algorithm, run_experiment
from .prediction import write_predictions_csv
from .synthesis import SynthesisConfig, load_base_pool, make_blobs, synthesize

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERIC = 4
EXIT_DIMENSION = 5


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(primary_output: str, command: str, args: argparse.Namespace,
                    inputs: list[str], outputs: list[str]) -> str:
    manifest_path = primary_output + ".manifest.json"
    params = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = {
        "tool": "miplgp",
        "tool_version": __version__,
        "command": command,
        "parameters": params,
        "inputs": {path: _sha256(path) for path in inputs},
        "outputs": sorted(set(outputs + [manifest_path])),
    }
    with open(manifest_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(manifest, indent=2, sort_keys=True))
        fh.write("\n")
    return manifest_path


@contextmanager
def _cleanup_on_failure(paths: list[str]):
    try:
        yield
    except BaseException:
        for path in paths:
            try:
                os.unlink(path)
            except OSError:
                pass
        raise


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part.strip())


# -- subcommands --------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = SynthesisConfig(
        num_bags=args.bags,
        min_bag_size=args.min_ins,
        max_bag_size=args.max_ins,
        pos_fraction=args.pos_frac,
        num_false_positives=args.r,
        seed=args.seed,
        target_classes=_int_list(args.targets) if args.targets else (),
        reserved_classes=_int_list(args.reserved) if args.reserved else (),
    )
    inputs = [args.base] if args.base else []
    outputs = [args.out]
    manifest = _write_manifest(args.out, "synth", args, inputs, outputs)
    with _cleanup_on_failure(outputs + [manifest]):
        if args.blobs:
            dataset = make_blobs(args.classes, args.dim, args.separation, cfg)
        else:
            pool = load_base_pool(args.base)
            dataset = synthesize(pool, cfg)
        write_jsonl(dataset, args.out)
    print(
        f"wrote {args.out}: {dataset.num_bags} bags, {dataset.num_instances} instances, "
        f"q={dataset.label_space.num_classes}, d={dataset.feature_dim}"
    )
    return EXIT_OK


def _estimator_from_args(args: argparse.Namespace, variant: str, seed: int) -> MiplGpClassifier:
    return MiplGpClassifier(
        n_iterations=args.iters,
        learning_rate=args.lr,
        alpha_eps=args.alpha_eps,
        nu=args.nu,
        mc_samples=args.mc,
        variant=variant,
        standardize=not args.no_standardize,
        train_lengthscale=args.train_lengthscale,
        train_outputscale=args.train_outputscale,
        random_state=seed,
    )


def cmd_train(args: argparse.Namespace) -> int:
    dataset = read_jsonl(args.data)
    split = random_split(dataset, args.split_frac, args.split_seed)
    train_bags = dataset.subset(split.train_bag_ids)
    outputs = [args.model_out] + ([args.trace_out] if args.trace_out else [])
    manifest = _write_manifest(args.model_out, "train", args, [args.data], outputs)
    with _cleanup_on_failure(outputs + [manifest]):
        est = _estimator_from_args(args, args.variant, args.seed)
        est.fit(train_bags, n_classes=dataset.label_space.num_classes)
        est.save(args.model_out)
        if args.trace_out:
            write_trace_csv(args.trace_out, est.trace_)
    print(
        f"trained on {len(train_bags)} bags ({len(split.test_bag_ids)} held out); "
        f"final nlml {est.trace_[-1].nlml:.6f}; wrote {args.model_out}"
    )
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    est = MiplGpClassifier.load(args.model)
    dataset = read_jsonl(args.data)
    outputs = [args.out]
    manifest = _write_manifest(args.out, "predict", args, [args.model, args.data], outputs)
    with _cleanup_on_failure(outputs + [manifest]):
        truths = [bag.true_label for bag in dataset.bags]
        predictions = est.predict_bags(
            [bag.instances for bag in dataset.bags],
            bag_ids=[bag.bag_id for bag in dataset.bags],
            true_labels=truths if all(t is not None for t in truths) else None,
            seed=args.seed,
        )
        write_predictions_csv(args.out, predictions)
    line = f"wrote {args.out}: {len(predictions)} bags"
    if all(t is not None for t in truths):
        correct = sum(p.predicted_label == t for p, t in zip(predictions, truths))
        line += f", accuracy {correct / len(truths):.4f}"
    print(line)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    dataset = read_jsonl(args.data)
    names = [name.strip() for name in args.algos.split(",") if name.strip()]
    for name in names:
        if name not in ALGORITHM_NAMES:
            raise ValueError(f"unknown algorithm {name!r}; known: {ALGORITHM_NAMES}")

    def factory_for(name: str):
        if name.startswith("miplgp"):
            overrides = dict(
                n_iterations=args.iters,
                learning_rate=args.lr,
                alpha_eps=args.alpha_eps,
                nu=args.nu,
                mc_samples=args.mc,
            )
        else:
            overrides = dict(n_neighbors=args.neighbors)
        return lambda seed: make_algorithm(name, seed, **overrides)

    algorithms = [(name, factory_for(name)) for name in names]
    outputs = [args.report_out] + ([args.csv_out] if args.csv_out else [])
    manifest = _write_manifest(args.report_out, "eval", args, [args.data], outputs)
    with _cleanup_on_failure(outputs + [manifest]):
        progress = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None
        report = run_experiment(
            dataset, algorithms, args.runs, args.split_frac, args.seed, progress=progress
        )
        with open(args.report_out, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
            fh.write("\n")
        if args.csv_out:
            report.write_csv(args.csv_out)
    print(report.format_summary())
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="miplgp",
        description="Multi-instance partial-label learning with Gaussian processes",
    )
    parser.add_argument("--version", action="version", version=f"miplgp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a bag dataset (MIPL-JSONL v1)")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--blobs", action="store_true", help="Gaussian blob pool")
    source.add_argument("--base", help="base pool CSV (label,f1,...,fd; no header)")
    p.add_argument("--classes", type=int, default=5, help="blob target classes")
    p.add_argument("--dim", type=int, default=8, help="blob feature dimension")
    p.add_argument("--separation", type=float, default=6.0, help="blob mean separation")
    p.add_argument("--targets", default="", help="pool target classes, e.g. 0,2,4")
    p.add_argument("--reserved", default="", help="pool reserved classes, e.g. 1,3")
    p.add_argument("--bags", type=int, default=100)
    p.add_argument("--min-ins", type=int, default=5, help="minimum instances per bag")
    p.add_argument("--max-ins", type=int, default=15, help="maximum instances per bag")
    p.add_argument("--pos-frac", type=float, default=0.2)
    p.add_argument("--r", type=int, default=1, help="false positives per candidate set")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output dataset path")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train on one side of a seeded split")
    p.add_argument("--data", required=True, help="MIPL-JSONL dataset")
    p.add_argument("--model-out", required=True, help="model output (MIPLGP-MODEL v1)")
    p.add_argument("--trace-out", help="optional per-iteration trace CSV")
    p.add_argument("--split-frac", type=float, default=0.5)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--variant", choices=("full", "uniform", "naive"), default="full")
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--alpha-eps", type=float, default=1e-4)
    p.add_argument("--nu", type=float, default=2.5)
    p.add_argument("--mc", type=int, default=512)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--train-lengthscale", action="store_true")
    p.add_argument("--train-outputscale", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict every bag of a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--seed", type=int, default=None, help="Monte-Carlo seed override")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="repeated-split evaluation with paired tests")
    p.add_argument("--data", required=True)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--split-frac", type=float, default=0.5)
    p.add_argument("--algos", default="miplgp,plknn-mean",
                   help=f"comma list from {', '.join(ALGORITHM_NAMES)}")
    p.add_argument("--seed", type=int, default=0, help="base split seed")
    p.add_argument("--report-out", required=True, help="report JSON path")
    p.add_argument("--csv-out", help="optional flat per-run CSV")
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--alpha-eps", type=float, default=1e-4)
    p.add_argument("--nu", type=float, default=2.5)
    p.add_argument("--mc", type=int, default=512)
    p.add_argument("--neighbors", type=int, default=10)
    p.add_argument("--verbose", action="store_true", help="per-run progress to stderr")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DimensionMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DatasetFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
