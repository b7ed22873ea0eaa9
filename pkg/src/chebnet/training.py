"""Loss, optimizers, the training loop, and repeated stratified cross-validation.

The cross-validation protocol re-infers the graph from each run's training
fold only, so no test-fold information leaks into the graph structure.
Ablation baselines swap that inferred graph for an edgeless graph or a
random graph with the same edge count.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .coarsening import build_hierarchy
from .errors import (ConfigurationError, DimensionError,
                     TrainingDivergedError, ValidationError)
from .graph import SignalMatrix, SparseGraph, infer_graph, pearson_correlation
from .network import (N_CONV_LAYERS, ChebNetModel, NetworkConfig, backward,
                      forward, init_model, predict)

ADAM = "adam"
SGD_MOMENTUM = "sgd_momentum"
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
MOMENTUM = 0.9
REPORT_SCHEMA_VERSION = 1
GRAPH_SOURCES = ("inferred", "empty", "random")


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyperparameters."""

    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-3
    weight_decay: float = 5e-4
    optimizer: str = ADAM
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigurationError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch size must be positive, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ConfigurationError(f"learning rate must be positive, got {self.learning_rate}")
        if self.weight_decay < 0:
            raise ConfigurationError(f"weight decay must be >= 0, got {self.weight_decay}")
        if self.optimizer not in (ADAM, SGD_MOMENTUM):
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "TrainConfig":
        return TrainConfig(**d)


@dataclass(frozen=True)
class Dataset:
    """Node signals paired with one integer class label per subject."""

    signals: SignalMatrix
    labels: np.ndarray
    class_names: tuple

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", tuple(str(c) for c in self.class_names))
        if labels.ndim != 1 or len(labels) != self.signals.n_subjects:
            raise DimensionError(
                f"{labels.size} labels for {self.signals.n_subjects} subjects")
        n_classes = len(self.class_names)
        if n_classes < 2:
            raise ValidationError("need at least 2 class names")
        if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
            raise ValidationError(
                f"labels must lie in [0, {n_classes}), got range "
                f"[{labels.min()}, {labels.max()}]")
        counts = np.bincount(labels, minlength=n_classes)
        empty = [self.class_names[c] for c in range(n_classes) if counts[c] == 0]
        if empty:
            raise ValidationError(f"classes with no subjects: {empty}")

    @property
    def n_subjects(self) -> int:
        return self.signals.n_subjects

    @property
    def n_nodes(self) -> int:
        return self.signals.n_nodes

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def select(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.signals.select_subjects(idx), self.labels[idx],
                       self.class_names)


@dataclass(frozen=True)
class LearningCurve:
    """Per-epoch training trace; val_acc is NaN when no holdout was given."""

    epoch: np.ndarray
    train_loss: np.ndarray
    train_acc: np.ndarray
    val_acc: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "epoch", np.asarray(self.epoch, dtype=np.int64))
        for name in ("train_loss", "train_acc", "val_acc"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        n = len(self.epoch)
        for name in ("train_loss", "train_acc", "val_acc"):
            if len(getattr(self, name)) != n:
                raise DimensionError(f"curve column {name} length != {n}")

    def __len__(self) -> int:
        return len(self.epoch)

    @staticmethod
    def empty() -> "LearningCurve":
        z = np.zeros(0)
        return LearningCurve(z, z, z, z)


@dataclass(frozen=True)
class RunRecord:
    """One cross-validation run: fold identity, test metrics, and its curve."""

    repeat: int
    fold: int
    accuracy: float
    confusion: np.ndarray
    n_test: int
    curve: LearningCurve

    def __post_init__(self):
        conf = np.asarray(self.confusion, dtype=np.int64)
        conf.flags.writeable = False
        object.__setattr__(self, "confusion", conf)
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValidationError(f"accuracy {self.accuracy} outside [0, 1]")


@dataclass(frozen=True)
class ExperimentReport:
    """Aggregate of folds x repeats cross-validation runs.

    mean_accuracy is the unweighted mean over runs (each run counts once,
    regardless of test-fold size).
    """

    runs: tuple
    folds: int
    repeats: int
    class_names: tuple
    graph_source: str
    master_seed: int
    network_config: NetworkConfig
    train_config: TrainConfig

    def __post_init__(self):
        object.__setattr__(self, "runs", tuple(self.runs))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if len(self.runs) != self.folds * self.repeats:
            raise ValidationError(
                f"{len(self.runs)} runs for {self.folds} folds x {self.repeats} repeats")

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([r.accuracy for r in self.runs])

    @property
    def mean_accuracy(self) -> float:
        return float(self.accuracies.mean())

    @property
    def std_accuracy(self) -> float:
        return float(self.accuracies.std())

    def total_confusion(self) -> np.ndarray:
        return np.sum([r.confusion for r in self.runs], axis=0)


def cross_entropy_loss(probs, labels) -> float:
    """Mean negative log-probability of the true class, clamped at 1e-12."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=int)
    if probs.ndim != 2 or labels.shape != (probs.shape[0],):
        raise DimensionError(
            f"probs {probs.shape} incompatible with labels {labels.shape}")
    row_sums = probs.sum(axis=1)
    if np.any(np.abs(row_sums - 1.0) > 1e-6):
        raise ValidationError("probability rows must sum to 1")
    if labels.size == 0:
        raise ValidationError("empty batch has no loss")
    if labels.min() < 0 or labels.max() >= probs.shape[1]:
        raise ValidationError("label index outside [0, n_classes)")
    p = np.maximum(probs[np.arange(len(labels)), labels], 1e-12)
    return float(np.mean(-np.log(p)))


@dataclass
class OptimizerState:
    """Per-parameter accumulators; `slot1` is m (adam) or velocity (momentum)."""

    step: int
    slot1: dict
    slot2: dict

    @staticmethod
    def initial(params: dict, cfg: TrainConfig) -> "OptimizerState":
        zeros = lambda: {k: np.zeros_like(v) for k, v in params.items()}
        return OptimizerState(0, zeros(), zeros() if cfg.optimizer == ADAM else {})


def optimizer_step(params: dict, grads: dict, state: OptimizerState,
                   cfg: TrainConfig) -> tuple[dict, OptimizerState]:
    """One update; returns fresh params/state, inputs untouched.

    Weight decay is decoupled (subtracted directly from the parameter, not
    fed through the gradient accumulators) and skips biases.
    """
    if set(grads) != set(params):
        raise DimensionError("gradient keys do not match parameter keys")
    t = state.step + 1
    new_params, slot1, slot2 = {}, {}, {}
    for key, p in params.items():
        g = grads[key]
        if g.shape != p.shape:
            raise DimensionError(f"gradient shape {g.shape} != param shape {p.shape} for {key}")
        if cfg.optimizer == ADAM:
            m = ADAM_BETA1 * state.slot1[key] + (1.0 - ADAM_BETA1) * g
            v = ADAM_BETA2 * state.slot2[key] + (1.0 - ADAM_BETA2) * g * g
            m_hat = m / (1.0 - ADAM_BETA1 ** t)
            v_hat = v / (1.0 - ADAM_BETA2 ** t)
            step = cfg.learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
            slot1[key], slot2[key] = m, v
        else:
            vel = MOMENTUM * state.slot1[key] + g
            step = cfg.learning_rate * vel
            slot1[key] = vel
        p_new = p - step
        if cfg.weight_decay > 0.0 and not key.endswith("_bias"):
            p_new = p_new - cfg.learning_rate * cfg.weight_decay * p
        new_params[key] = p_new
    return new_params, OptimizerState(t, slot1, slot2)


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    """Counts indexed [true class, predicted class]."""
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    conf = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(conf, (y_true, y_pred), 1)
    return conf


def evaluate(model: ChebNetModel, ds: Dataset) -> tuple[float, np.ndarray]:
    """Inference-mode accuracy and confusion matrix on a dataset."""
    preds = predict(model, ds.signals.values.T)
    acc = float(np.mean(preds == ds.labels))
    return acc, confusion_matrix(ds.labels, preds, ds.n_classes)


def train(ds: Dataset, g: SparseGraph, ncfg: NetworkConfig, tcfg: TrainConfig,
          val_ds: Dataset | None = None) -> tuple[ChebNetModel, LearningCurve]:
    """Build hierarchy and model from the graph, then run mini-batch epochs.

    Train loss/accuracy are recorded from the training passes themselves
    (so dropout affects them); validation accuracy is an inference-mode
    pass per epoch when `val_ds` is given, else NaN.
    """
    if ds.n_nodes != g.n:
        raise DimensionError(f"dataset has {ds.n_nodes} nodes but graph has {g.n}")
    if ds.n_classes != ncfg.n_classes:
        raise ConfigurationError(
            f"dataset has {ds.n_classes} classes but network expects {ncfg.n_classes}")
    hierarchy = build_hierarchy(g, N_CONV_LAYERS, seed=tcfg.seed)
    model = init_model(ncfg, hierarchy)
    x_all = ds.signals.values.T
    y_all = ds.labels
    n = len(y_all)
    params = model.params()
    state = OptimizerState.initial(params, tcfg)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence(tcfg.seed, spawn_key=(0,)))

    epochs, losses, train_accs, val_accs = [], [], [], []
    for epoch in range(1, tcfg.epochs + 1):
        order = shuffle_rng.permutation(n)
        loss_sum = 0.0
        hit_sum = 0
        for start in range(0, n, tcfg.batch_size):
            idx = order[start:start + tcfg.batch_size]
            probs, cache = forward(model, x_all[idx], train_mode=True)
            # Overflow shows up as nan/inf probabilities before the loss
            # (which validates and clamps) could ever go non-finite itself.
            if not np.all(np.isfinite(probs)):
                raise TrainingDivergedError(
                    epoch, f"non-finite network output at epoch {epoch}")
            batch_loss = cross_entropy_loss(probs, y_all[idx])
            if not math.isfinite(batch_loss):
                raise TrainingDivergedError(epoch, f"non-finite loss at epoch {epoch}")
            grads = backward(model, cache, y_all[idx])
            params, state = optimizer_step(params, grads, state, tcfg)
            model.set_params(params)
            loss_sum += batch_loss * len(idx)
            hit_sum += int(np.sum(np.argmax(probs, axis=1) == y_all[idx]))
        epochs.append(epoch)
        losses.append(loss_sum / n)
        train_accs.append(hit_sum / n)
        val_accs.append(evaluate(model, val_ds)[0] if val_ds is not None else np.nan)
    curve = LearningCurve(np.array(epochs, dtype=np.int64), np.array(losses),
                          np.array(train_accs), np.array(val_accs))
    return model, curve


def baseline_graph(kind: str, n: int, n_edges: int, seed: int) -> SparseGraph:
    """Ablation graphs: `empty` has no edges; `random` draws n_edges distinct
    node pairs uniformly with weights in (0, 1]."""
    if kind == "empty":
        return SparseGraph(n, ())
    if kind != "random":
        raise ValidationError(f"unknown baseline graph kind {kind!r}")
    max_edges = n * (n - 1) // 2
    if not 0 <= n_edges <= max_edges:
        raise ValidationError(
            f"cannot place {n_edges} edges on {n} nodes (max {max_edges})")
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(max_edges, size=n_edges, replace=False))
    iu, ju = np.triu_indices(n, k=1)
    weights = 1.0 - rng.random(n_edges)
    edges = tuple(zip(iu[chosen].tolist(), ju[chosen].tolist(), weights.tolist()))
    return SparseGraph(n, edges)


def stratified_folds(labels: np.ndarray, folds: int, rng: np.random.Generator) -> np.ndarray:
    """Fold index per subject; per-class counts across folds differ by <= 1."""
    labels = np.asarray(labels, dtype=int)
    assignment = np.empty(len(labels), dtype=np.int64)
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        members = members[rng.permutation(len(members))]
        assignment[members] = np.arange(len(members)) % folds
    return assignment


def resolve_graph(train_ds: Dataset, graph_source: str, threshold: float,
                  seed: int) -> SparseGraph:
    """The graph a run trains on: inferred, or an ablation stand-in.

    The random baseline matches the inferred graph's edge count, so the
    ablation isolates edge placement rather than edge budget.
    """
    if graph_source not in GRAPH_SOURCES:
        raise ValidationError(f"unknown graph source {graph_source!r}")
    if graph_source == "empty":
        return baseline_graph("empty", train_ds.n_nodes, 0, seed)
    corr = pearson_correlation(train_ds.signals)
    inferred = infer_graph(corr, threshold)
    if graph_source == "inferred":
        return inferred
    return baseline_graph("random", train_ds.n_nodes, inferred.n_edges, seed)


def _train_and_eval(train_ds: Dataset, test_ds: Dataset, g: SparseGraph,
                    ncfg: NetworkConfig, tcfg: TrainConfig):
    model, curve = train(train_ds, g, ncfg, tcfg)
    acc, conf = evaluate(model, test_ds)
    return acc, conf, curve


def cross_validate(ds: Dataset, ncfg: NetworkConfig, tcfg: TrainConfig,
                   folds: int, repeats: int, graph_source: str = "inferred",
                   threshold: float = 0.7, jobs: int = 1) -> ExperimentReport:
    """Repeated stratified k-fold evaluation with per-run graph inference.

    Every run (repeat r, fold f) draws its model/training seeds from the
    spawn key (r, f) of the master seed, so the full report is reproducible
    bit-exactly and independent of worker count.
    """
    if folds < 2:
        raise ValidationError(f"need at least 2 folds, got {folds}")
    if repeats < 1:
        raise ValidationError(f"need at least 1 repeat, got {repeats}")
    if graph_source not in GRAPH_SOURCES:
        raise ValidationError(f"unknown graph source {graph_source!r}")
    if jobs < 1:
        raise ValidationError(f"jobs must be positive, got {jobs}")
    counts = ds.class_counts()
    starved = [ds.class_names[c] for c in range(ds.n_classes) if counts[c] < folds]
    if starved:
        raise ConfigurationError(
            f"classes with fewer than {folds} subjects cannot be stratified: {starved}")
    master = tcfg.seed

    def run_one(repeat: int, fold: int, assignment: np.ndarray):
        seeds = np.random.SeedSequence(master, spawn_key=(repeat, fold)).generate_state(3)
        train_ds = ds.select(np.flatnonzero(assignment != fold))
        test_ds = ds.select(np.flatnonzero(assignment == fold))
        g = resolve_graph(train_ds, graph_source, threshold, int(seeds[2]))
        run_ncfg = replace(ncfg, seed=int(seeds[0]))
        run_tcfg = replace(tcfg, seed=int(seeds[1]))
        acc, conf, curve = _train_and_eval(train_ds, test_ds, g, run_ncfg, run_tcfg)
        return RunRecord(repeat, fold, acc, conf, test_ds.n_subjects, curve)

    tasks = []
    for repeat in range(repeats):
        fold_rng = np.random.default_rng(np.random.SeedSequence(master, spawn_key=(repeat,)))
        assignment = stratified_folds(ds.labels, folds, fold_rng)
        for fold in range(folds):
            tasks.append((repeat, fold, assignment))

    if jobs == 1:
        records = [run_one(*t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {(r, f): pool.submit(run_one, r, f, a) for r, f, a in tasks}
            records = [futures[r, f].result() for r, f, _ in tasks]
    records.sort(key=lambda rec: (rec.repeat, rec.fold))
    return ExperimentReport(tuple(records), folds, repeats, ds.class_names,
                            graph_source, master, ncfg, tcfg)


def _curve_to_json(curve: LearningCurve) -> dict:
    val = [None if math.isnan(v) else v for v in curve.val_acc.tolist()]
    return {"epoch": curve.epoch.tolist(), "train_loss": curve.train_loss.tolist(),
            "train_acc": curve.train_acc.tolist(), "val_acc": val}


def _curve_from_json(d: dict) -> LearningCurve:
    val = [math.nan if v is None else v for v in d["val_acc"]]
    return LearningCurve(np.array(d["epoch"], dtype=np.int64),
                         np.array(d["train_loss"]), np.array(d["train_acc"]),
                         np.array(val))


def report_to_json(report: ExperimentReport) -> dict:
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "folds": report.folds,
        "repeats": report.repeats,
        "class_names": list(report.class_names),
        "graph_source": report.graph_source,
        "master_seed": report.master_seed,
        "network_config": report.network_config.to_dict(),
        "train_config": report.train_config.to_dict(),
        "mean_accuracy": report.mean_accuracy,
        "std_accuracy": report.std_accuracy,
        "runs": [{
            "repeat": r.repeat,
            "fold": r.fold,
            "accuracy": r.accuracy,
            "n_test": r.n_test,
            "confusion": r.confusion.tolist(),
            "curve": _curve_to_json(r.curve),
        } for r in report.runs],
    }


def report_from_json(doc: dict) -> ExperimentReport:
    version = doc.get("schema_version")
    if version != REPORT_SCHEMA_VERSION:
        raise ValidationError(f"unsupported report schema version {version}")
    runs = tuple(RunRecord(r["repeat"], r["fold"], r["accuracy"],
                           np.array(r["confusion"], dtype=np.int64), r["n_test"],
                           _curve_from_json(r["curve"]))
                 for r in doc["runs"])
    return ExperimentReport(
        runs, doc["folds"], doc["repeats"], tuple(doc["class_names"]),
        doc["graph_source"], doc["master_seed"],
        NetworkConfig.from_dict(doc["network_config"]),
        TrainConfig.from_dict(doc["train_config"]))


def write_report_json(report: ExperimentReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report_to_json(report), fh, indent=2)
        fh.write("\n")


def read_report_json(path) -> ExperimentReport:
    with open(path) as fh:
        return report_from_json(json.load(fh))


def write_curve_csv(curve: LearningCurve, path) -> None:
    """Columns epoch,train_loss,train_acc,val_acc; val_acc blank when absent."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "train_acc", "val_acc"])
        for i in range(len(curve)):
            val = "" if math.isnan(curve.val_acc[i]) else repr(float(curve.val_acc[i]))
            writer.writerow([int(curve.epoch[i]), repr(float(curve.train_loss[i])),
                             repr(float(curve.train_acc[i])), val])


def read_curve_csv(path) -> LearningCurve:
    epochs, losses, taccs, vaccs = [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["epoch", "train_loss", "train_acc", "val_acc"]:
            raise ValidationError(f"unexpected curve header {header}")
        for row in reader:
            epochs.append(int(row[0]))
            losses.append(float(row[1]))
            taccs.append(float(row[2]))
            vaccs.append(math.nan if row[3] == "" else float(row[3]))
    return LearningCurve(np.array(epochs, dtype=np.int64), np.array(losses),
                         np.array(taccs), np.array(vaccs))
