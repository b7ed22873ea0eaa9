"""Multilevel graph coarsening for stride-2 pooling.

Greedy heavy-edge matching (normalized-cut flavored: the pair score is
w_ij * (1/d_i + 1/d_j)) halves the graph once per level. Levels are then
padded with edgeless fake nodes so every coarse node has exactly two
children, and nodes are reordered into a binary-tree layout where pooling
is a plain stride-2 reduction over contiguous rows.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValidationError
from .graph import SparseGraph
from .spectral import NodeSignal


@dataclass(frozen=True)
class Matching:
    """Disjoint node pairs plus leftover singletons covering every node."""

    pairs: tuple
    singletons: tuple

    def __post_init__(self):
        object.__setattr__(self, "pairs",
                           tuple((int(i), int(j)) for i, j in self.pairs))
        object.__setattr__(self, "singletons",
                           tuple(int(s) for s in self.singletons))

    def n_clusters(self) -> int:
        return len(self.pairs) + len(self.singletons)

    def covered_nodes(self) -> set:
        nodes = set(self.singletons)
        for i, j in self.pairs:
            nodes.add(i)
            nodes.add(j)
        return nodes


@dataclass(frozen=True)
class CoarseningHierarchy:
    """Padded, pooling-ordered graph sequence with parent maps.

    levels[0] is the padded original graph; each subsequent level is half
    the size. perm maps padded level-0 positions to original node indices,
    with fake slots taking indices >= n_real.
    """

    levels: tuple
    parents: tuple
    perm: np.ndarray
    fake_counts: tuple
    n_real: int

    def __post_init__(self):
        perm = np.asarray(self.perm, dtype=np.int64)
        perm.flags.writeable = False
        object.__setattr__(self, "perm", perm)
        object.__setattr__(self, "levels", tuple(self.levels))
        object.__setattr__(self, "parents",
                           tuple(np.asarray(p, dtype=np.int64) for p in self.parents))
        object.__setattr__(self, "fake_counts", tuple(int(c) for c in self.fake_counts))
        sizes = [g.n for g in self.levels]
        for l in range(len(sizes) - 1):
            if sizes[l] != 2 * sizes[l + 1]:
                raise ValidationError(
                    f"level {l} has {sizes[l]} nodes, expected exactly twice "
                    f"level {l + 1} ({sizes[l + 1]})")
        if sorted(perm.tolist()) != list(range(len(perm))):
            raise ValidationError("perm is not a bijection on padded indices")

    @property
    def n_levels(self) -> int:
        return len(self.levels) - 1

    @property
    def level_sizes(self) -> tuple:
        return tuple(g.n for g in self.levels)

    def to_metadata(self) -> dict:
        return {
            "schema_version": 1,
            "n_real": self.n_real,
            "level_sizes": list(self.level_sizes),
            "fake_counts": list(self.fake_counts),
            "perm": self.perm.tolist(),
            "parents": [p.tolist() for p in self.parents],
        }


def heavy_edge_matching(g: SparseGraph, seed: int, order=None) -> Matching:
    """Greedy matching along heavy edges in a seeded random visit order.

    Each unmatched node pairs with the unmatched neighbor maximizing
    w_ij * (1/d_i + 1/d_j); ties break toward the lowest neighbor index.
    The optional explicit visit order exists for hand-traceable tests.
    """
    deg = g.degrees()
    inv_deg = np.where(deg > 0, 1.0 / np.where(deg > 0, deg, 1.0), 0.0)
    neighbors: list = [[] for _ in range(g.n)]
    for i, j, w in g.edges:
        neighbors[i].append((j, w))
        neighbors[j].append((i, w))
    if order is None:
        order = np.random.default_rng(seed).permutation(g.n)
    else:
        order = np.asarray(order, dtype=int)
        if sorted(order.tolist()) != list(range(g.n)):
            raise ValidationError("explicit visit order must be a permutation of all nodes")
    matched = np.zeros(g.n, dtype=bool)
    pairs = []
    for v in order:
        v = int(v)
        if matched[v]:
            continue
        best_u = -1
        best_score = -np.inf
        for u, w in neighbors[v]:
            if matched[u]:
                continue
            score = w * (inv_deg[v] + inv_deg[u])
            if score > best_score or (score == best_score and u < best_u):
                best_score = score
                best_u = u
        if best_u >= 0:
            matched[v] = matched[best_u] = True
            pairs.append((min(v, best_u), max(v, best_u)))
    singletons = tuple(int(v) for v in np.flatnonzero(~matched))
    return Matching(tuple(pairs), singletons)


def coarsen_once(g: SparseGraph, m: Matching) -> tuple[SparseGraph, np.ndarray]:
    """Contract a matching: pairs and singletons become coarse nodes.

    Coarse edge weight is the sum of all fine weights between the two
    clusters; intra-pair weight is dropped rather than kept as a self-loop.
    """
    covered = m.covered_nodes()
    if len(covered) != g.n or covered != set(range(g.n)):
        raise ValidationError("matching does not cover every node exactly once")
    clusters = sorted([tuple(sorted(p)) for p in m.pairs] + [(s,) for s in m.singletons])
    parent = np.empty(g.n, dtype=np.int64)
    for c, members in enumerate(clusters):
        for v in members:
            parent[v] = c
    weights: dict = {}
    for i, j, w in g.edges:
        ci, cj = int(parent[i]), int(parent[j])
        if ci == cj:
            continue
        key = (min(ci, cj), max(ci, cj))
        weights[key] = weights.get(key, 0.0) + w
    edges = tuple((i, j, w) for (i, j), w in sorted(weights.items()))
    return SparseGraph(len(clusters), edges), parent


def build_hierarchy(g: SparseGraph, n_levels: int, seed: int) -> CoarseningHierarchy:
    """Match + coarsen n_levels times, then pad and reorder for pooling.

    Fake nodes are appended so every coarse node has exactly two children;
    the returned perm realizes pooling as a stride-2 reduction over
    contiguous pairs at every level.
    """
    if n_levels < 1:
        raise ValidationError(f"need at least one coarsening level, got {n_levels}")
    raw_graphs = [g]
    raw_parents = []
    for l in range(n_levels):
        level_seed = int(np.random.SeedSequence(seed, spawn_key=(l,)).generate_state(1)[0])
        m = heavy_edge_matching(raw_graphs[-1], level_seed)
        coarse, parent = coarsen_once(raw_graphs[-1], m)
        raw_graphs.append(coarse)
        raw_parents.append(parent)

    # Reorder bottom-up from the coarsest level: each parent's children
    # occupy consecutive slots, padded with fresh fake ids when short.
    orders = [None] * (n_levels + 1)
    orders[n_levels] = list(range(raw_graphs[n_levels].n))
    for l in range(n_levels - 1, -1, -1):
        raw_n = raw_graphs[l].n
        raw_n_next = raw_graphs[l + 1].n
        children: list = [[] for _ in range(raw_n_next)]
        for child, par in enumerate(raw_parents[l]):
            children[int(par)].append(child)
        next_fake = raw_n
        new_order = []
        for p in orders[l + 1]:
            if p < raw_n_next:
                ch = sorted(children[p])
            else:
                ch = []
            while len(ch) < 2:
                ch.append(next_fake)
                next_fake += 1
            new_order.extend(ch)
        orders[l] = new_order

    levels = []
    fake_counts = []
    for l in range(n_levels + 1):
        order = orders[l]
        raw_n = raw_graphs[l].n
        padded_n = len(order)
        pos = {old: new for new, old in enumerate(order) if old < raw_n}
        edges = tuple(
            (min(pos[i], pos[j]), max(pos[i], pos[j]), w)
            for i, j, w in raw_graphs[l].edges)
        fake = tuple(order[k] >= raw_n for k in range(padded_n))
        levels.append(SparseGraph(padded_n, edges, fake))
        fake_counts.append(padded_n - raw_n)

    parents = tuple(np.arange(levels[l].n, dtype=np.int64) // 2
                    for l in range(n_levels))
    return CoarseningHierarchy(tuple(levels), parents,
                               np.asarray(orders[0], dtype=np.int64),
                               tuple(fake_counts), g.n)


def permute_signal(x: NodeSignal, h: CoarseningHierarchy) -> NodeSignal:
    """Reorder a real-node signal into the padded pooling layout.

    Fake-node rows are zero-filled, which is safe because pooling always
    follows a rectifying nonlinearity.
    """
    if x.n_nodes != h.n_real:
        raise DimensionError(
            f"signal has {x.n_nodes} rows but hierarchy covers {h.n_real} real nodes")
    out = np.zeros((len(h.perm), x.n_channels))
    real = h.perm < h.n_real
    out[real] = x.values[h.perm[real]]
    return NodeSignal(out)


def pool(x: NodeSignal, factor: int) -> NodeSignal:
    """Max over each contiguous group of `factor` rows, per channel."""
    if factor < 1:
        raise ValidationError(f"pooling factor must be positive, got {factor}")
    n = x.n_nodes
    if n % factor != 0:
        raise DimensionError(f"{n} rows not divisible by pooling factor {factor}")
    v = x.values.reshape(n // factor, factor, x.n_channels)
    return NodeSignal(v.max(axis=1))


def write_hierarchy_json(h: CoarseningHierarchy, path) -> None:
    with open(path, "w") as fh:
        json.dump(h.to_metadata(), fh, indent=2)
        fh.write("\n")
