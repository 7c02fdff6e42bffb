"""Command-line interface.

Subcommands cover the full workflow: generate synthetic data, train a
model, evaluate or classify with it, export embeddings, and sweep a config
field across values.  Exit codes: 0 success, 1 for data/numerical/runtime
failures, 2 for usage errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import __version__
from .checkpoint import load_model, save_model
from .data import (
    make_mixture,
    read_features_auto,
    read_labels_csv,
    write_cldf,
    write_features_csv,
)
from .errors import CludiError
from .inference import InferenceConfig, classify_batch, evaluate, export_embeddings
from .trainer import TrainConfig, init_model, train

_CONFIG_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig)}
_TUPLE_FIELDS = {"hidden_sizes", "noise_var_range"}


def _int_list(text: str) -> tuple:
    try:
        return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated ints: {exc}")


def _float_pair(text: str) -> tuple:
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected two comma-separated floats")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _float_list(text: str) -> list:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats: {exc}")


def _add_inference_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--chains", type=int, default=8,
                   help="stochastic chains per item (default 8)")
    p.add_argument("--steps", type=int, default=100,
                   help="grid points per chain (default 100)")
    p.add_argument("--seed", type=int, default=0,
                   help="inference stream seed (default 0)")
    p.add_argument("--deterministic", action="store_true",
                   help="noise-free reverse updates")


def _inference_config(args) -> InferenceConfig:
    return InferenceConfig(n_chains=args.chains, n_steps=args.steps,
                           seed=args.seed, deterministic=args.deterministic)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cludi",
        description="Diffusion-based clustering over precomputed features.",
    )
    parser.add_argument("--version", action="version",
                        version=f"cludi {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample a synthetic Gaussian mixture")
    g.add_argument("--out", required=True, help="output feature file")
    g.add_argument("--clusters", type=int, default=5)
    g.add_argument("--dim", type=int, default=32)
    g.add_argument("--per-cluster", type=int, default=200)
    g.add_argument("--radius", type=float, default=8.0)
    g.add_argument("--noise-std", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--format", choices=("cldf", "csv"), default=None,
                   help="default: cldf unless --out ends in .csv")
    g.add_argument("--labels-out", default=None,
                   help="labels CSV (csv format only; cldf embeds labels)")

    t = sub.add_parser("train", help="train a model on a feature file")
    t.add_argument("--features", required=True)
    t.add_argument("--out", required=True, help="model checkpoint path")
    t.add_argument("--labels", default=None,
                   help="labels for during-training evaluation")
    t.add_argument("--config", default=None,
                   help="JSON file of training-config fields; explicit "
                        "flags override it")
    t.add_argument("--history", default=None,
                   help="write per-epoch loss/metrics CSV here")
    t.add_argument("--quiet", action="store_true")
    t.add_argument("--clusters", dest="n_clusters", type=int)
    t.add_argument("--embed-dim", dest="embed_dim", type=int)
    t.add_argument("--hidden", dest="hidden_sizes", type=_int_list,
                   metavar="H1,H2,...")
    t.add_argument("--time-dim", dest="time_dim", type=int)
    t.add_argument("--horizon", dest="horizon", type=int)
    t.add_argument("--f2", dest="f2", type=float)
    t.add_argument("--tau", dest="tau", type=float)
    t.add_argument("--tau-col", dest="tau_col", type=float)
    t.add_argument("--lam", dest="lam", type=float)
    t.add_argument("--gamma", dest="gamma", type=float)
    t.add_argument("--snr-mode", dest="snr_clip_mode",
                   choices=("max", "min"))
    t.add_argument("--naive-ce", dest="naive_ce_ablation",
                   action="store_const", const=True)
    t.add_argument("--views", dest="n_views", type=int)
    t.add_argument("--teacher-steps", dest="teacher_steps", type=int)
    t.add_argument("--drop-prob", dest="drop_prob", type=float)
    t.add_argument("--noise-var", dest="noise_var_range", type=_float_pair,
                   metavar="LO,HI")
    t.add_argument("--lr", dest="lr", type=float)
    t.add_argument("--batch-items", dest="batch_items", type=int)
    t.add_argument("--epochs", dest="epochs", type=int)
    t.add_argument("--seed", dest="seed", type=int)
    t.add_argument("--eval-every", dest="eval_every", type=int)
    t.add_argument("--eval-chains", dest="eval_chains", type=int)
    t.add_argument("--eval-steps", dest="eval_steps", type=int)

    e = sub.add_parser("eval", help="score a model against true labels")
    e.add_argument("--features", required=True)
    e.add_argument("--labels", default=None,
                   help="labels CSV; optional when the feature file embeds "
                        "labels")
    e.add_argument("--model", required=True)
    e.add_argument("--json-out", default=None)
    _add_inference_args(e)

    i = sub.add_parser("infer", help="classify items with a trained model")
    i.add_argument("--features", required=True)
    i.add_argument("--model", required=True)
    i.add_argument("--out", required=True, help="predicted-labels CSV")
    i.add_argument("--probs-out", default=None,
                   help="also write per-cluster probabilities CSV")
    _add_inference_args(i)

    x = sub.add_parser("export-embeddings",
                       help="write per-item denoised embeddings as CSV")
    x.add_argument("--features", required=True)
    x.add_argument("--model", required=True)
    x.add_argument("--out", required=True)
    _add_inference_args(x)

    a = sub.add_parser("ablate",
                       help="train and score one model per value of a "
                            "config field")
    a.add_argument("--features", required=True)
    a.add_argument("--labels", default=None)
    a.add_argument("--config", default=None)
    a.add_argument("--field", default="f2",
                   help="training-config field to sweep (default f2)")
    a.add_argument("--values", required=True, type=_float_list,
                   metavar="V1,V2,...")
    a.add_argument("--out", default=None, help="JSON report path")
    a.add_argument("--threads", type=int, default=None,
                   help="parallel trainings (default CLUDI_THREADS or 1)")
    _add_inference_args(a)

    return parser


def _load_config_file(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except ValueError as exc:
            raise CludiError(f"config file {path}: invalid JSON: {exc}")
    if not isinstance(raw, dict):
        raise CludiError(f"config file {path}: expected a JSON object")
    unknown = set(raw) - set(_CONFIG_FIELDS)
    if unknown:
        raise CludiError(
            f"config file {path}: unknown fields {sorted(unknown)}"
        )
    for key in _TUPLE_FIELDS & set(raw):
        if isinstance(raw[key], list):
            raw[key] = tuple(raw[key])
    return raw


def _train_config(args, feature_dim: int) -> TrainConfig:
    merged = _load_config_file(args.config) if args.config else {}
    for name in _CONFIG_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value
    if merged.get("feature_dim", feature_dim) != feature_dim:
        raise CludiError(
            f"config says feature_dim={merged['feature_dim']} but the "
            f"feature file has {feature_dim} columns"
        )
    merged["feature_dim"] = feature_dim
    if "n_clusters" not in merged:
        raise CludiError(
            "number of clusters is required (--clusters or config file)"
        )
    try:
        return TrainConfig(**merged)
    except TypeError as exc:
        raise CludiError(f"invalid training config: {exc}")


def _write_labels_csv(path, labels) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("label\n")
        for v in labels:
            fh.write(f"{int(v)}\n")


def _write_history_csv(path, history) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,loss,nmi,acc,ari\n")
        for row in history:
            fh.write(
                f"{row['epoch']},{row['loss']:.17g},{row['nmi']:.17g},"
                f"{row['acc']:.17g},{row['ari']:.17g}\n"
            )


def _load_labeled(features_path, labels_path):
    features, embedded = read_features_auto(features_path)
    labels = embedded
    if labels_path is not None:
        labels = read_labels_csv(labels_path)
    return features, labels


def _cmd_generate(args) -> int:
    fmt = args.format
    if fmt is None:
        fmt = "csv" if str(args.out).endswith(".csv") else "cldf"
    features, labels = make_mixture(
        args.clusters, args.dim, args.per_cluster, args.radius,
        args.noise_std, args.seed,
    )
    if fmt == "cldf":
        write_cldf(args.out, features, labels)
    else:
        write_features_csv(args.out, features)
        if args.labels_out:
            _write_labels_csv(args.labels_out, labels)
        else:
            print("note: csv output without --labels-out drops labels",
                  file=sys.stderr)
    print(f"wrote {features.shape[0]} x {features.shape[1]} features "
          f"({fmt}) to {args.out}")
    return 0


def _cmd_train(args) -> int:
    features, labels = _load_labeled(args.features, args.labels)
    config = _train_config(args, features.shape[1])
    model = init_model(config)
    model, history = train(model, features, labels)
    save_model(args.out, model)
    if args.history:
        _write_history_csv(args.history, history)
    if not args.quiet:
        for row in history:
            line = f"epoch {row['epoch']:4d}  loss {row['loss']:.6f}"
            if not np.isnan(row["nmi"]):
                line += (f"  nmi {row['nmi']:.4f}  acc {row['acc']:.4f}"
                         f"  ari {row['ari']:.4f}")
            print(line)
    print(f"saved model to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    features, labels = _load_labeled(args.features, args.labels)
    if labels is None:
        raise CludiError("eval needs labels (--labels or an embedding file "
                         "that carries them)")
    model = load_model(args.model)
    report = evaluate(model, features, labels, _inference_config(args))
    payload = {k: float(v) for k, v in report.items() if k != "labels"}
    text = json.dumps(payload, sort_keys=True, indent=2)
    print(text)
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return 0


def _cmd_infer(args) -> int:
    features, _ = read_features_auto(args.features)
    model = load_model(args.model)
    probs, labels = classify_batch(model, features, _inference_config(args))
    _write_labels_csv(args.out, labels)
    if args.probs_out:
        header = [f"p{k}" for k in range(probs.shape[1])]
        write_features_csv(args.probs_out, probs, header=header)
    print(f"classified {labels.size} items to {args.out}")
    return 0


def _cmd_export_embeddings(args) -> int:
    features, _ = read_features_auto(args.features)
    model = load_model(args.model)
    emb, _, _ = export_embeddings(model, features, _inference_config(args))
    header = [f"e{j}" for j in range(emb.shape[1])]
    write_features_csv(args.out, emb, header=header)
    print(f"wrote {emb.shape[0]} x {emb.shape[1]} embeddings to {args.out}")
    return 0


def _cmd_ablate(args) -> int:
    features, labels = _load_labeled(args.features, args.labels)
    if labels is None:
        raise CludiError("ablate needs labels to score the sweep")
    if args.field not in _CONFIG_FIELDS:
        raise CludiError(f"unknown config field {args.field!r}")
    base = _load_config_file(args.config) if args.config else {}
    if "n_clusters" not in base:
        base["n_clusters"] = int(labels.max()) + 1
    base["feature_dim"] = features.shape[1]
    inf_cfg = _inference_config(args)

    def run(value):
        field_type = _CONFIG_FIELDS[args.field].type
        cast = int(value) if field_type == "int" else value
        config = TrainConfig(**{**base, args.field: cast})
        model, history = train(init_model(config), features)
        report = evaluate(model, features, labels, inf_cfg)
        return {
            "value": cast,
            "acc": float(report["acc"]),
            "nmi": float(report["nmi"]),
            "ari": float(report["ari"]),
            "marginal_entropy": float(report["marginal_entropy"]),
            "final_loss": history[-1]["loss"] if history else float("nan"),
        }

    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("CLUDI_THREADS", "1"))
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, args.values))
    else:
        results = [run(v) for v in args.values]

    report = {"field": args.field, "results": results,
              "best_value": max(results, key=lambda r: r["acc"])["value"]}
    text = json.dumps(report, sort_keys=True, indent=2)
    print(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "infer": _cmd_infer,
    "export-embeddings": _cmd_export_embeddings,
    "ablate": _cmd_ablate,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except CludiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
