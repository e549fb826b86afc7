"""Command-line entry point: ``fitruth {train,evaluate,benchmark,render-tree}``.

Exit codes: 0 success (or trusted final judgement), 1 untrusted final
judgement, 2 usage error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .argumentation import EXPORT_FORMATS, Judgement, export_tree, format_dialogue, tree_from_dict
from .config import Config, load_config
from .datamodel import Dataset, as_instance, load_dataset
from .errors import ContractError, FitruthError, ParseError, SchemaError
from .importance import TECHNIQUES
from .models import (
    Predictor,
    SubprocessPredictor,
    f1_score,
    load_predictor,
    save_model,
    train_logistic,
    train_mlp,
)

log = logging.getLogger("fitruth")

EXIT_OK, EXIT_UNTRUSTED, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


def bundled_data() -> tuple[Path, Path]:
    base = resources.files("fitruth") / "data"
    return Path(str(base / "banknote_style.csv")), Path(str(base / "banknote_style.schema"))


def _load_data(args) -> Dataset:
    if args.data is None:
        if args.schema is not None:
            raise UsageError("--schema given without --data")
        data, schema = bundled_data()
    else:
        if args.schema is None:
            raise UsageError("--data needs a matching --schema file")
        data, schema = Path(args.data), Path(args.schema)
    for p in (data, schema):
        if not p.exists():
            raise UsageError(f"no such file: {p}")
    return load_dataset(data, schema, delimiter=args.delimiter)


def _techniques(text: str) -> list[str]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    bad = [t for t in names if t not in TECHNIQUES]
    if bad or not names:
        raise UsageError(f"unknown technique(s) {bad}; choose from {', '.join(TECHNIQUES)}")
    return names


def _config(args) -> Config:
    cfg = load_config(getattr(args, "config", None))
    priority = None
    if getattr(args, "priority", None):
        priority = tuple(p.strip() for p in args.priority.split(",") if p.strip())
    return cfg.updated(
        delta=args.delta, delta_scope=args.delta_scope, mode=args.mode,
        neighbourhood=args.neighbourhood, seed=args.seed, priority=priority,
        target_class=args.target_class, votes=args.votes,
    )


def _add_data_args(p):
    p.add_argument("--data", help="delimiter-separated data file with a header row (default: bundled set)")
    p.add_argument("--schema", help="column-kind schema file (name = kind)")
    p.add_argument("--delimiter", default=",")


def _add_eval_args(p):
    p.add_argument("--config", help="key = value settings file (default: $FITRUTH_CONFIG)")
    p.add_argument("--delta", type=float)
    p.add_argument("--delta-scope", dest="delta_scope", choices=["all", "neutral"],
                   help="apply the tolerance to every importance or to neutral ones only")
    p.add_argument("--mode", choices=["deterministic", "stochastic"])
    p.add_argument("--votes", type=int, help="draws per alteration in stochastic mode")
    p.add_argument("--neighbourhood", choices=["training", "local", "local_weighted"])
    p.add_argument("--seed", type=int)
    p.add_argument("--priority", help="comma-separated tie-break order of techniques")
    p.add_argument("--target-class", dest="target_class", choices=["positive", "negative", "predicted"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fitruth", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a logistic or MLP model and write it as JSON")
    _add_data_args(p)
    p.add_argument("--kind", required=True, choices=["logistic", "mlp"])
    p.add_argument("--hidden", default="8", help="comma-separated hidden layer sizes (mlp)")
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="test the explanations of one instance")
    _add_data_args(p)
    _add_eval_args(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", help="model JSON file")
    src.add_argument("--subprocess", help="command speaking the line protocol")
    which = p.add_mutually_exclusive_group(required=True)
    which.add_argument("--instance", type=int, help="row index in the dataset")
    which.add_argument("--values", help="comma-separated feature values")
    p.add_argument("--techniques", default="lime,kernel_shap,permutation")
    p.add_argument("--out-dir", default=".")

    p = sub.add_parser("benchmark", help="untruthful-percentage table over sampled instances")
    _add_data_args(p)
    _add_eval_args(p)
    p.add_argument("--model", action="append", required=True, help="[name=]path, repeatable")
    p.add_argument("--techniques", default="lime,kernel_shap,permutation,intrinsic")
    p.add_argument("--sample", type=int, default=50)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="write the summary JSON here")

    p = sub.add_parser("render-tree", help="export an argument tree from a stored evaluation")
    p.add_argument("--result", required=True, help="result.json written by evaluate")
    p.add_argument("--which", default="final", help="'final' or a technique name")
    p.add_argument("--format", default="text", choices=list(EXPORT_FORMATS))
    p.add_argument("--out", help="output file (default: stdout)")
    return parser


def cmd_train(args) -> int:
    ds = _load_data(args)
    if not 0 < args.test_fraction < 1:
        raise UsageError("--test-fraction must lie in (0, 1)")
    rng = np.random.default_rng(args.seed)
    idx = rng.permutation(ds.n_rows)
    n_test = max(1, int(round(args.test_fraction * ds.n_rows)))
    train, test = ds.subset(np.sort(idx[n_test:])), ds.subset(np.sort(idx[:n_test]))
    if args.kind == "logistic":
        model = train_logistic(train, args.epochs, args.lr)
    else:
        try:
            hidden = tuple(int(h) for h in args.hidden.split(",") if h.strip())
        except ValueError:
            raise UsageError(f"bad --hidden {args.hidden!r}") from None
        model = train_mlp(train, hidden, args.epochs, args.lr, args.seed)
    save_model(model, args.out, test.rows[:5])
    print(f"held-out F1: {f1_score(model, test):.4f}")
    return EXIT_OK


def _predictor(args, n_features: int) -> Predictor:
    if args.model:
        if not Path(args.model).exists():
            raise UsageError(f"no such model file: {args.model}")
        return load_predictor(args.model)
    return SubprocessPredictor(args.subprocess, n_features)


def cmd_evaluate(args) -> int:
    from .selector import evaluate_instance

    ds = _load_data(args)
    techniques = _techniques(args.techniques)
    config = _config(args)
    if args.values is not None:
        try:
            x = as_instance([float(v) for v in args.values.split(",")], ds.n_features)
        except (ValueError, ContractError) as exc:
            raise UsageError(f"bad --values: {exc}") from None
    else:
        try:
            x = ds.instance(args.instance)
        except IndexError as exc:
            raise UsageError(str(exc)) from None
    model = _predictor(args, ds.n_features)
    if model.n_features != ds.n_features:
        raise UsageError(f"model expects {model.n_features} features, data has {ds.n_features}")
    try:
        result = evaluate_instance(model, techniques, x, ds, config)
    finally:
        if isinstance(model, SubprocessPredictor):
            model.close()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "result.json").write_text(json.dumps(result.to_dict(), indent=2, ensure_ascii=False) + "\n",
                                     encoding="utf-8")
    (out / "dialogue.txt").write_text(format_dialogue(result.justification), encoding="utf-8")
    (out / "exclusions.txt").write_text(format_dialogue(result.exclusion_dialogue), encoding="utf-8")
    tree = result.final_tree or result.trees[result.chosen_technique]
    for fmt, name in (("text", "tree.txt"), ("dot", "tree.dot"), ("json", "tree.json")):
        (out / name).write_text(export_tree(tree, fmt), encoding="utf-8")

    names = ds.feature_names
    for tech, count in result.untruthful_counts.items():
        print(f"{tech}: {count} untruthful ({result.judgements[tech].value})")
    kept = ", ".join(names[j] for j in result.truthful_features) or "(none)"
    print(f"chosen: {result.chosen_technique}; truthful features: {kept}")
    print(f"final judgement: {result.final_judgement.value}")
    return EXIT_OK if result.final_judgement is Judgement.UNWARRANTED else EXIT_UNTRUSTED


def cmd_benchmark(args) -> int:
    from .benchmark import run_benchmark

    ds = _load_data(args)
    techniques = _techniques(args.techniques)
    config = _config(args)
    if args.sample < 1:
        raise UsageError("--sample must be at least 1")
    models = {}
    for spec in args.model:
        name, _, path = spec.rpartition("=")
        name = name or Path(path).stem
        if not Path(path).exists():
            raise UsageError(f"no such model file: {path}")
        models[name] = load_predictor(path)
    summary = run_benchmark(models, ds, techniques, args.sample, config.seed, config, args.jobs)
    sys.stdout.write(summary.format_table())
    if args.out:
        Path(args.out).write_text(summary.to_json(), encoding="utf-8")
    return EXIT_OK


def cmd_render_tree(args) -> int:
    path = Path(args.result)
    if not path.exists():
        raise UsageError(f"no such result file: {path}")
    doc = json.loads(path.read_text(encoding="utf-8"))
    if args.which == "final":
        tree_doc = doc.get("final_tree") or doc["techniques"][doc["chosen_technique"]]["tree"]
    elif args.which in doc.get("techniques", {}):
        tree_doc = doc["techniques"][args.which]["tree"]
    else:
        raise UsageError(f"result has no tree for {args.which!r}")
    text = export_tree(tree_from_dict(tree_doc), args.format)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "benchmark": cmd_benchmark,
    "render-tree": cmd_render_tree,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ParseError, SchemaError) as exc:
        print(f"fitruth: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FitruthError, OSError, ValueError) as exc:
        print(f"fitruth: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
