"""Dataset file I/O and the planted-community synthetic generator.

The generator builds signals with a known block structure: nodes in the
same community share a per-subject latent factor, so their pairwise
correlation is controlled by the strength/noise ratio, and class identity
shifts community means. The ground-truth graph (all intra-community
pairs) lets tests score edge recovery of the inference pipeline exactly.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, asdict

import numpy as np

from .errors import DimensionError, ValidationError
from .graph import SignalMatrix, SparseGraph
from .training import Dataset

SIGNALS_CORNER = "node_id"
LABELS_HEADER = ["subject_id", "label"]


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the planted-community generator.

    `offsets[c][k]` is the mean shift class c adds to every node of
    community k; alternating its sign across neighboring communities keeps
    class separation high without introducing strong cross-community
    correlation.
    """

    n_nodes: int = 120
    block_sizes: tuple = (30, 30, 30, 30)
    n_classes: int = 2
    n_subjects_per_class: int = 60
    strength: float = 0.9
    noise_std: float = 0.3
    offsets: tuple = ((0.0, 0.0, 0.0, 0.0), (1.5, -1.5, 1.5, -1.5))
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "block_sizes", tuple(int(b) for b in self.block_sizes))
        object.__setattr__(self, "offsets",
                           tuple(tuple(float(o) for o in row) for row in self.offsets))
        if self.n_nodes < 1 or self.n_subjects_per_class < 1:
            raise ValidationError("node and subject counts must be positive")
        if self.n_classes < 2:
            raise ValidationError(f"need at least 2 classes, got {self.n_classes}")
        if any(b < 1 for b in self.block_sizes):
            raise ValidationError(f"community sizes must be positive, got {self.block_sizes}")
        if sum(self.block_sizes) != self.n_nodes:
            raise ValidationError(
                f"community sizes {self.block_sizes} sum to {sum(self.block_sizes)}, "
                f"not n_nodes={self.n_nodes}")
        if not 0.0 < self.strength < 1.0:
            raise ValidationError(f"strength must lie in (0, 1), got {self.strength}")
        if not self.noise_std > 0.0:
            raise ValidationError(f"noise std must be positive, got {self.noise_std}")
        if len(self.offsets) != self.n_classes:
            raise DimensionError(
                f"{len(self.offsets)} offset rows for {self.n_classes} classes")
        for c, row in enumerate(self.offsets):
            if len(row) != len(self.block_sizes):
                raise DimensionError(
                    f"offset row {c} has {len(row)} entries for "
                    f"{len(self.block_sizes)} communities")

    @property
    def n_communities(self) -> int:
        return len(self.block_sizes)

    @property
    def n_subjects(self) -> int:
        return self.n_classes * self.n_subjects_per_class

    def community_of(self) -> np.ndarray:
        """Community index per node."""
        return np.repeat(np.arange(self.n_communities), self.block_sizes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["block_sizes"] = list(self.block_sizes)
        d["offsets"] = [list(row) for row in self.offsets]
        return d

    @staticmethod
    def from_dict(d: dict) -> "SyntheticSpec":
        d = dict(d)
        d["block_sizes"] = tuple(d["block_sizes"])
        d["offsets"] = tuple(tuple(row) for row in d["offsets"])
        return SyntheticSpec(**d)


def generate_synthetic(spec: SyntheticSpec) -> tuple[Dataset, SparseGraph]:
    """Draw a dataset from a SyntheticSpec; also return the ground-truth graph.

    x[v, s] = strength * z[s, community(v)] + offsets[class(s)][community(v)]
              + noise_std * eps[s, v], with z and eps standard normal.
    """
    rng = np.random.default_rng(spec.seed)
    comm = spec.community_of()
    n_sub = spec.n_subjects
    labels = np.repeat(np.arange(spec.n_classes), spec.n_subjects_per_class)
    z = rng.standard_normal((n_sub, spec.n_communities))
    eps = rng.standard_normal((n_sub, spec.n_nodes))
    offsets = np.asarray(spec.offsets)
    values = (spec.strength * z[:, comm] + offsets[labels][:, comm]
              + spec.noise_std * eps).T
    signals = SignalMatrix(values,
                           tuple(f"node{i}" for i in range(spec.n_nodes)),
                           tuple(f"subj{j}" for j in range(n_sub)))
    class_names = tuple(f"class{c}" for c in range(spec.n_classes))
    ds = Dataset(signals, labels, class_names)

    edges = []
    for k in range(spec.n_communities):
        members = np.flatnonzero(comm == k)
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                edges.append((int(members[a]), int(members[b]), 1.0))
    return ds, SparseGraph(spec.n_nodes, tuple(edges))


def _parses_as_float(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _read_rows(path) -> list:
    with open(path, newline="") as fh:
        rows = [[cell.strip() for cell in row] for row in csv.reader(fh) if row]
    if not rows:
        raise ValidationError(f"{path}: file is empty")
    width = len(rows[0])
    for r, row in enumerate(rows):
        if len(row) != width:
            raise ValidationError(
                f"{path}: row {r + 1} has {len(row)} cells, expected {width}")
    return rows


def _detect_layout(rows: list) -> tuple[bool, bool]:
    """Decide (header present, node-label column present).

    Files written by write_dataset carry the corner marker. Otherwise the
    least-decorated interpretation under which every remaining cell parses
    as a number wins; purely numeric headers or node labels are therefore
    indistinguishable from data and should be avoided.
    """
    if rows[0][0] == SIGNALS_CORNER:
        return True, True
    for header, label_col in ((False, False), (True, False), (False, True), (True, True)):
        body = rows[1:] if header else rows
        start = 1 if label_col else 0
        if body and all(_parses_as_float(c) for row in body for c in row[start:]):
            return header, label_col
    return False, False


def load_signals_csv(path) -> SignalMatrix:
    """Signals CSV: rows are nodes, columns are subjects.

    A header row of subject ids and a first column of node ids are both
    optional and auto-detected.
    """
    rows = _read_rows(path)
    header, label_col = _detect_layout(rows)
    body = rows[1:] if header else rows
    if not body:
        raise ValidationError(f"{path}: no signal rows")
    start = 1 if label_col else 0
    n_subjects = len(rows[0]) - start
    if n_subjects < 1:
        raise ValidationError(f"{path}: no subject columns")
    if header:
        subject_ids = tuple(rows[0][start:])
    else:
        subject_ids = tuple(f"subj{j}" for j in range(n_subjects))
    if label_col:
        node_ids = tuple(row[0] for row in body)
    else:
        node_ids = tuple(f"node{i}" for i in range(len(body)))

    values = np.empty((len(body), n_subjects))
    offset = 2 if header else 1
    for i, row in enumerate(body):
        for j, cell in enumerate(row[start:]):
            if not _parses_as_float(cell):
                raise ValidationError(
                    f"{path}: non-numeric cell {cell!r} at row {i + offset}, "
                    f"column {j + start + 1}")
            v = float(cell)
            if not np.isfinite(v):
                raise ValidationError(
                    f"{path}: non-finite value {cell!r} at row {i + offset}, "
                    f"column {j + start + 1}")
            values[i, j] = v
    return SignalMatrix(values, node_ids, subject_ids)


def _read_labels_csv(path) -> tuple:
    """Returns (subject ids, label strings) in file order."""
    rows = _read_rows(path)
    if [c for c in rows[0]] != LABELS_HEADER:
        raise ValidationError(
            f"{path}: expected header {','.join(LABELS_HEADER)!r}, got {rows[0]}")
    if len(rows) < 2:
        raise ValidationError(f"{path}: no label rows")
    ids, labels = [], []
    seen = set()
    for r, row in enumerate(rows[1:], start=2):
        sid, label = row
        if sid in seen:
            raise ValidationError(f"{path}: duplicate subject_id {sid!r} at row {r}")
        seen.add(sid)
        ids.append(sid)
        labels.append(label)
    return tuple(ids), tuple(labels)


def load_dataset(signals_path, labels_path) -> Dataset:
    """Join a signals CSV with a labels CSV into a validated Dataset.

    Label strings map to class indices in first-appearance order. When the
    signals file carries subject ids, labels are aligned to signal column
    order by id; otherwise both files must simply agree on subject count.
    """
    signals = load_signals_csv(signals_path)
    label_ids, label_strs = _read_labels_csv(labels_path)
    if len(label_ids) != signals.n_subjects:
        raise ValidationError(
            f"signals have {signals.n_subjects} subject columns but "
            f"{labels_path} has {len(label_ids)} label rows")
    class_names: list = []
    index_of: dict = {}
    for s in label_strs:
        if s not in index_of:
            index_of[s] = len(class_names)
            class_names.append(s)
    by_id = dict(zip(label_ids, label_strs))
    default_ids = tuple(f"subj{j}" for j in range(signals.n_subjects))
    if signals.subject_ids != default_ids:
        missing = [sid for sid in signals.subject_ids if sid not in by_id]
        if missing:
            raise ValidationError(
                f"{labels_path}: no label for subject ids {missing[:5]}")
        labels = np.array([index_of[by_id[sid]] for sid in signals.subject_ids])
    else:
        signals = SignalMatrix(signals.values, signals.node_ids, label_ids)
        labels = np.array([index_of[s] for s in label_strs])
    return Dataset(signals, labels, tuple(class_names))


def write_signals_csv(signals: SignalMatrix, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([SIGNALS_CORNER, *signals.subject_ids])
        for i, nid in enumerate(signals.node_ids):
            writer.writerow([nid, *(repr(v) for v in signals.values[i].tolist())])


def write_dataset(ds: Dataset, signals_path, labels_path) -> None:
    """Write both CSVs; load_dataset on the result round-trips exactly."""
    write_signals_csv(ds.signals, signals_path)
    with open(labels_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LABELS_HEADER)
        for sid, label in zip(ds.signals.subject_ids, ds.labels.tolist()):
            writer.writerow([sid, ds.class_names[label]])
