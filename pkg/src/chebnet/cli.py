"""Command-line surface: graph inference, coarsening, training, evaluation.

Every subcommand resolves its options as defaults < JSON config file <
flags, writes all artifacts (delimited outputs plus rendered figures) into
one output directory, and drops a manifest recording inputs and seed.
Exit codes: 0 success, 1 bad usage or invalid inputs, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from . import figures
from ._version import __version__
from .benchmark import run_benchmark, write_benchmark_csv
from .coarsening import build_hierarchy, write_hierarchy_json
from .data import SyntheticSpec, generate_synthetic, load_dataset, \
    load_signals_csv, write_dataset
from .errors import ChebnetError, ConfigurationError, DomainError, \
    ValidationError
from .graph import infer_graph, pearson_correlation, read_edge_list_csv, \
    write_edge_list_csv
from .manifest import create_manifest, write_manifest
from .network import NetworkConfig, forward, load_model, save_model
from .training import TrainConfig, cross_validate, resolve_graph, train, \
    write_curve_csv, write_report_json

OUT_ROOT_ENV = "CHEBNET_OUT_ROOT"

_NET_DEFAULTS = {
    "k": 25,
    "channels": "32,64,128",
    "fc_width": 128,
    "dropout_keep": 0.5,
    "laplacian_kind": "normalized",
}
_TRAIN_DEFAULTS = {
    "epochs": 200,
    "batch_size": 32,
    "learning_rate": 1e-3,
    "weight_decay": 5e-4,
    "optimizer": "adam",
    "seed": 0,
    "threshold": 0.7,
    "graph_source": "inferred",
}


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with exit code 1, not 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _int_list(value) -> tuple:
    if isinstance(value, str):
        value = value.split(",")
    return tuple(int(v) for v in value)


def _float_list(value) -> tuple:
    if isinstance(value, str):
        value = value.split(",")
    return tuple(float(v) for v in value)


def _load_config(path) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: config must be a JSON object")
    return doc


def _resolve(args, config: dict, defaults: dict) -> dict:
    unknown = sorted(set(config) - set(defaults) - {"out"})
    if unknown:
        raise ValidationError(f"unknown config keys: {unknown}")
    resolved = {}
    for key, default in defaults.items():
        flag = getattr(args, key)
        if flag is not None:
            resolved[key] = flag
        elif key in config:
            resolved[key] = config[key]
        else:
            resolved[key] = default
    return resolved


def _resolve_out(args, config: dict) -> Path:
    out = args.out if args.out is not None else config.get("out")
    if out is None:
        raise ValidationError("an output directory is required (--out or config key 'out')")
    path = Path(out)
    if not path.is_absolute():
        root = os.environ.get(OUT_ROOT_ENV)
        if root:
            path = Path(root) / path
    if path.exists() and not args.force:
        raise ValidationError(
            f"output directory {path} already exists; pass --force to write into it")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _prelude(args, defaults: dict) -> tuple[dict, Path]:
    config = _load_config(args.config)
    resolved = _resolve(args, config, defaults)
    out = _resolve_out(args, config)
    resolved["out"] = str(out)
    return resolved, out


def _require(resolved: dict, key: str):
    if resolved[key] is None:
        raise ValidationError(
            f"missing required option {key!r} (flag --{key.replace('_', '-')} or config)")
    return resolved[key]


def _jsonable(resolved: dict) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in resolved.items()}


def _network_config(resolved: dict, n_classes: int) -> NetworkConfig:
    return NetworkConfig(K=resolved["k"],
                         conv_channels=_int_list(resolved["channels"]),
                         fc_width=resolved["fc_width"],
                         n_classes=n_classes,
                         dropout_keep=resolved["dropout_keep"],
                         laplacian_kind=resolved["laplacian_kind"],
                         seed=resolved["seed"])


def _train_config(resolved: dict) -> TrainConfig:
    return TrainConfig(epochs=resolved["epochs"],
                       batch_size=resolved["batch_size"],
                       learning_rate=resolved["learning_rate"],
                       weight_decay=resolved["weight_decay"],
                       optimizer=resolved["optimizer"],
                       seed=resolved["seed"])


def cmd_infer_graph(args) -> int:
    resolved, out = _prelude(args, {"signals": None, "threshold": 0.7})
    signals = load_signals_csv(_require(resolved, "signals"))
    g = infer_graph(pearson_correlation(signals), resolved["threshold"])
    write_edge_list_csv(g, out / "graph.csv")
    figures.plot_adjacency(g, out / "adjacency.png", title="inferred adjacency")
    write_manifest(create_manifest("infer-graph", _jsonable(resolved),
                                   [resolved["signals"]], 0),
                   out / "manifest.json")
    print(f"inferred graph: {g.n} nodes, {g.n_edges} edges "
          f"(threshold {resolved['threshold']})")
    print(f"wrote {out}")
    return 0


def cmd_coarsen(args) -> int:
    resolved, out = _prelude(args, {"signals": None, "graph": None, "n_nodes": None,
                                    "threshold": 0.7, "levels": 3, "seed": 0})
    if (resolved["signals"] is None) == (resolved["graph"] is None):
        raise ValidationError("provide exactly one of --signals / --graph")
    if resolved["graph"] is not None:
        g = read_edge_list_csv(resolved["graph"], resolved["n_nodes"])
        input_path = resolved["graph"]
    else:
        signals = load_signals_csv(resolved["signals"])
        g = infer_graph(pearson_correlation(signals), resolved["threshold"])
        input_path = resolved["signals"]
    h = build_hierarchy(g, resolved["levels"], resolved["seed"])
    write_hierarchy_json(h, out / "hierarchy.json")
    figures.plot_hierarchy(h, out / "hierarchy.png")
    write_manifest(create_manifest("coarsen", _jsonable(resolved), [input_path],
                                   resolved["seed"]),
                   out / "manifest.json")
    print(f"level sizes: {list(h.level_sizes)} (fake per level: {list(h.fake_counts)})")
    print(f"wrote {out}")
    return 0


def cmd_synth(args) -> int:
    defaults = {"n_nodes": 120, "block_sizes": "30,30,30,30", "n_classes": 2,
                "subjects_per_class": 60, "strength": 0.9, "noise_std": 0.3,
                "offsets": None, "seed": 0}
    resolved, out = _prelude(args, defaults)
    block_sizes = _int_list(resolved["block_sizes"])
    if resolved["offsets"] is None:
        # Class c shifts community k by 1.5*c with alternating sign, which
        # separates classes without aligning communities with each other.
        resolved["offsets"] = [[1.5 * c * (-1.0) ** k
                                for k in range(len(block_sizes))]
                               for c in range(resolved["n_classes"])]
    spec = SyntheticSpec(n_nodes=resolved["n_nodes"],
                         block_sizes=block_sizes,
                         n_classes=resolved["n_classes"],
                         n_subjects_per_class=resolved["subjects_per_class"],
                         strength=resolved["strength"],
                         noise_std=resolved["noise_std"],
                         offsets=tuple(tuple(row) for row in resolved["offsets"]),
                         seed=resolved["seed"])
    ds, truth = generate_synthetic(spec)
    write_dataset(ds, out / "signals.csv", out / "labels.csv")
    write_edge_list_csv(truth, out / "truth_graph.csv")
    figures.plot_adjacency(truth, out / "truth_adjacency.png", title="planted adjacency")
    write_manifest(create_manifest("synth", _jsonable(resolved), [], spec.seed),
                   out / "manifest.json")
    print(f"generated {ds.n_subjects} subjects x {ds.n_nodes} nodes, "
          f"{ds.n_classes} classes; truth graph has {truth.n_edges} edges")
    print(f"wrote {out}")
    return 0


def cmd_train(args) -> int:
    defaults = {"signals": None, "labels": None,
                "val_signals": None, "val_labels": None,
                **_NET_DEFAULTS, **_TRAIN_DEFAULTS}
    resolved, out = _prelude(args, defaults)
    ds = load_dataset(_require(resolved, "signals"), _require(resolved, "labels"))
    if (resolved["val_signals"] is None) != (resolved["val_labels"] is None):
        raise ValidationError("--val-signals and --val-labels must be given together")
    val_ds = None
    if resolved["val_signals"] is not None:
        val_ds = load_dataset(resolved["val_signals"], resolved["val_labels"])
    ncfg = _network_config(resolved, ds.n_classes)
    tcfg = _train_config(resolved)
    g = resolve_graph(ds, resolved["graph_source"], resolved["threshold"],
                      resolved["seed"])
    model, curve = train(ds, g, ncfg, tcfg, val_ds=val_ds)
    save_model(model, out / "model.npz")
    write_curve_csv(curve, out / "curve.csv")
    figures.plot_learning_curve(curve, out / "curve.png")
    with open(out / "classes.json", "w") as fh:
        json.dump(list(ds.class_names), fh)
        fh.write("\n")
    inputs = [p for p in (resolved["signals"], resolved["labels"],
                          resolved["val_signals"], resolved["val_labels"])
              if p is not None]
    write_manifest(create_manifest("train", _jsonable(resolved), inputs,
                                   resolved["seed"]),
                   out / "manifest.json")
    if len(curve):
        line = (f"epoch {int(curve.epoch[-1])}: "
                f"train loss {curve.train_loss[-1]:.4f}, "
                f"train acc {curve.train_acc[-1]:.4f}")
        if val_ds is not None:
            line += f", val acc {curve.val_acc[-1]:.4f}"
        print(line)
    print(f"graph: {g.n_edges} edges ({resolved['graph_source']}); "
          f"model has {model.param_count()} parameters")
    print(f"wrote {out}")
    return 0


def cmd_predict(args) -> int:
    resolved, out = _prelude(args, {"model": None, "signals": None, "classes": None})
    model = load_model(_require(resolved, "model"))
    signals = load_signals_csv(_require(resolved, "signals"))
    if resolved["classes"] is not None:
        with open(resolved["classes"]) as fh:
            class_names = json.load(fh)
        if len(class_names) != model.cfg.n_classes:
            raise ValidationError(
                f"{len(class_names)} class names for a "
                f"{model.cfg.n_classes}-class model")
    else:
        class_names = [f"class{c}" for c in range(model.cfg.n_classes)]
    probs, _ = forward(model, signals.values.T, train_mode=False)
    preds = probs.argmax(axis=1)
    with open(out / "predictions.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject_id", "predicted_label",
                         *(f"prob_{name}" for name in class_names)])
        for j, sid in enumerate(signals.subject_ids):
            writer.writerow([sid, class_names[preds[j]],
                             *(repr(p) for p in probs[j].tolist())])
    inputs = [resolved["model"], resolved["signals"]]
    if resolved["classes"] is not None:
        inputs.append(resolved["classes"])
    write_manifest(create_manifest("predict", _jsonable(resolved), inputs, 0),
                   out / "manifest.json")
    for c, name in enumerate(class_names):
        print(f"{name}: {int((preds == c).sum())} subjects")
    print(f"wrote {out}")
    return 0


def cmd_cross_validate(args) -> int:
    defaults = {"signals": None, "labels": None, "folds": 5, "repeats": 10,
                "jobs": 1, **_NET_DEFAULTS, **_TRAIN_DEFAULTS}
    resolved, out = _prelude(args, defaults)
    ds = load_dataset(_require(resolved, "signals"), _require(resolved, "labels"))
    ncfg = _network_config(resolved, ds.n_classes)
    tcfg = _train_config(resolved)
    report = cross_validate(ds, ncfg, tcfg, resolved["folds"], resolved["repeats"],
                            graph_source=resolved["graph_source"],
                            threshold=resolved["threshold"],
                            jobs=resolved["jobs"])
    write_report_json(report, out / "report.json")
    figures.plot_accuracy_per_run(report, out / "accuracy.png")
    figures.plot_confusion(report.total_confusion(), report.class_names,
                           out / "confusion.png")
    write_manifest(create_manifest("cross-validate", _jsonable(resolved),
                                   [resolved["signals"], resolved["labels"]],
                                   resolved["seed"]),
                   out / "manifest.json")
    print(f"mean accuracy {report.mean_accuracy:.4f} "
          f"(std {report.std_accuracy:.4f}) over {len(report.runs)} runs "
          f"[graph: {resolved['graph_source']}]")
    print(f"wrote {out}")
    return 0


def cmd_benchmark(args) -> int:
    resolved, out = _prelude(args, {"n": 512, "k": 25, "densities": "0.01,0.02",
                                    "seed": 0, "timing_repeats": 3})
    rows = run_benchmark(resolved["n"], resolved["k"],
                         _float_list(resolved["densities"]),
                         seed=resolved["seed"],
                         timing_repeats=resolved["timing_repeats"])
    write_benchmark_csv(rows, out / "benchmark.csv")
    figures.plot_benchmark(rows, out / "benchmark.png")
    write_manifest(create_manifest("benchmark", _jsonable(resolved), [],
                                   resolved["seed"]),
                   out / "manifest.json")
    for r in rows:
        print(f"n={r.n} edges={r.edges} K={r.K} {r.method}: {r.seconds:.6f}s")
    print(f"wrote {out}")
    return 0


def _add_common(p) -> None:
    p.add_argument("--config", help="flat JSON config file; flags override its values")
    p.add_argument("--out", help=f"output directory (relative paths resolve "
                                 f"under ${OUT_ROOT_ENV} when set)")
    p.add_argument("--force", action="store_true",
                   help="write into an existing output directory")


def _add_net_flags(p) -> None:
    p.add_argument("--k", type=int, help="Chebyshev polynomial order")
    p.add_argument("--channels", help="conv channel widths, e.g. 32,64,128")
    p.add_argument("--fc-width", type=int, dest="fc_width")
    p.add_argument("--dropout-keep", type=float, dest="dropout_keep")
    p.add_argument("--laplacian-kind", dest="laplacian_kind",
                   choices=["combinatorial", "normalized"])


def _add_train_flags(p) -> None:
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--weight-decay", type=float, dest="weight_decay")
    p.add_argument("--optimizer", choices=["adam", "sgd_momentum"])
    p.add_argument("--seed", type=int)
    p.add_argument("--threshold", type=float,
                   help="correlation threshold for graph inference")
    p.add_argument("--graph-source", dest="graph_source",
                   choices=["inferred", "empty", "random"])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chebnet",
                     description="graph inference, coarsening, and spectral "
                                 "graph-convolution training")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("infer-graph", help="threshold a correlation matrix into a graph")
    _add_common(p)
    p.add_argument("--signals", help="signals CSV (rows nodes, columns subjects)")
    p.add_argument("--threshold", type=float)
    p.set_defaults(func=cmd_infer_graph)

    p = sub.add_parser("coarsen", help="build the pooling hierarchy for a graph")
    _add_common(p)
    p.add_argument("--signals", help="signals CSV to infer the graph from")
    p.add_argument("--graph", help="edge-list CSV to coarsen directly")
    p.add_argument("--n-nodes", type=int, dest="n_nodes",
                   help="node count when --graph omits isolated tail nodes")
    p.add_argument("--threshold", type=float)
    p.add_argument("--levels", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_coarsen)

    p = sub.add_parser("synth", help="generate a planted-community dataset")
    _add_common(p)
    p.add_argument("--n-nodes", type=int, dest="n_nodes")
    p.add_argument("--block-sizes", dest="block_sizes",
                   help="community sizes, e.g. 30,30,30,30")
    p.add_argument("--n-classes", type=int, dest="n_classes")
    p.add_argument("--subjects-per-class", type=int, dest="subjects_per_class")
    p.add_argument("--strength", type=float)
    p.add_argument("--noise-std", type=float, dest="noise_std")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth, offsets=None)

    p = sub.add_parser("train", help="train a model on a labeled dataset")
    _add_common(p)
    p.add_argument("--signals")
    p.add_argument("--labels")
    p.add_argument("--val-signals", dest="val_signals")
    p.add_argument("--val-labels", dest="val_labels")
    _add_net_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="classify subjects with a saved model")
    _add_common(p)
    p.add_argument("--model", help="model file written by train")
    p.add_argument("--signals")
    p.add_argument("--classes", help="classes.json written by train")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("cross-validate",
                       help="repeated stratified k-fold evaluation")
    _add_common(p)
    p.add_argument("--signals")
    p.add_argument("--labels")
    p.add_argument("--folds", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--jobs", type=int, help="parallel worker threads")
    _add_net_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_cross_validate)

    p = sub.add_parser("benchmark", help="time the two filter application paths")
    _add_common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--densities", help="edge densities, e.g. 0.01,0.02")
    p.add_argument("--seed", type=int)
    p.add_argument("--timing-repeats", type=int, dest="timing_repeats")
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else int(exc.code)
    except (ValidationError, ConfigurationError, DomainError, FileNotFoundError,
            FileExistsError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ChebnetError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
