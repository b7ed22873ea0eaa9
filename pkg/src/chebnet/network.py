"""The 5-layer spectral graph-convolution classifier.

Three Chebyshev graph-conv layers walk down the coarsening hierarchy
(filter at level l, rectify, stride-2 max-pool to level l+1), followed by
one hidden fully-connected layer with dropout and a softmax output layer.
Forward, backward, and prediction are implemented directly in numpy with
hand-derived gradients; the Chebyshev recursion is differentiated via its
adjoint recursion, so no T_k matrices are ever materialized.
"""
from __future__ import annotations

import io
import json
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.sparse as sp

from .coarsening import CoarseningHierarchy
from .errors import (ConfigurationError, ContractError, DimensionError,
                     ValidationError)
from .graph import NORMALIZED, LaplacianOp, SparseGraph, rescaled_laplacian

N_CONV_LAYERS = 3
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture hyperparameters; every value the model shape depends on."""

    K: int = 25
    conv_channels: tuple = (32, 64, 128)
    fc_width: int = 128
    n_classes: int = 2
    dropout_keep: float = 0.5
    laplacian_kind: str = NORMALIZED
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "conv_channels", tuple(int(c) for c in self.conv_channels))
        if self.K < 1:
            raise ConfigurationError(f"polynomial order K must be >= 1, got {self.K}")
        if len(self.conv_channels) != N_CONV_LAYERS:
            raise ConfigurationError(
                f"need exactly {N_CONV_LAYERS} conv channel widths, got {self.conv_channels}")
        if any(c < 1 for c in self.conv_channels):
            raise ConfigurationError(f"conv channels must be positive, got {self.conv_channels}")
        if self.fc_width < 1:
            raise ConfigurationError(f"fc width must be positive, got {self.fc_width}")
        if self.n_classes < 2:
            raise ConfigurationError(f"need at least 2 classes, got {self.n_classes}")
        if not 0.0 < self.dropout_keep <= 1.0:
            raise ConfigurationError(
                f"dropout keep probability must lie in (0, 1], got {self.dropout_keep}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["conv_channels"] = list(self.conv_channels)
        return d

    @staticmethod
    def from_dict(d: dict) -> "NetworkConfig":
        return NetworkConfig(**{**d, "conv_channels": tuple(d["conv_channels"])})


@dataclass
class ChebNetModel:
    """Parameters plus the graph structures they are bound to."""

    cfg: NetworkConfig
    hierarchy: CoarseningHierarchy
    laplacians: list          # rescaled LaplacianOp per conv level (0..2)
    conv_theta: list          # (K, F_in, F_out) per conv layer
    conv_bias: list           # (F_out,) per conv layer
    fc1_weight: np.ndarray
    fc1_bias: np.ndarray
    fc2_weight: np.ndarray
    fc2_bias: np.ndarray
    dropout_rng: np.random.Generator = field(repr=False, default=None)

    @property
    def n_real(self) -> int:
        return self.hierarchy.n_real

    def params(self) -> dict:
        out = {}
        for l in range(N_CONV_LAYERS):
            out[f"conv{l + 1}_theta"] = self.conv_theta[l]
            out[f"conv{l + 1}_bias"] = self.conv_bias[l]
        out["fc1_weight"] = self.fc1_weight
        out["fc1_bias"] = self.fc1_bias
        out["fc2_weight"] = self.fc2_weight
        out["fc2_bias"] = self.fc2_bias
        return out

    def set_params(self, params: dict) -> None:
        for l in range(N_CONV_LAYERS):
            self.conv_theta[l] = params[f"conv{l + 1}_theta"]
            self.conv_bias[l] = params[f"conv{l + 1}_bias"]
        self.fc1_weight = params["fc1_weight"]
        self.fc1_bias = params["fc1_bias"]
        self.fc2_weight = params["fc2_weight"]
        self.fc2_bias = params["fc2_bias"]

    def param_count(self) -> int:
        return sum(p.size for p in self.params().values())


@dataclass
class ForwardCache:
    """Intermediates recorded in train mode, replayable for exact backprop."""

    batch_size: int
    conv_tstack: list         # (K, n_l, B, F_in) per conv layer
    conv_pre: list            # pre-activation (B, n_l, F_out) per conv layer
    pool_argmax: list         # (B, n_l/2, F_out) in {0, 1} per conv layer
    flat: np.ndarray
    fc1_pre: np.ndarray
    dropout_mask: np.ndarray
    fc2_input: np.ndarray
    probs: np.ndarray


def _glorot(rng: np.random.Generator, shape: tuple, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_model(cfg: NetworkConfig, h: CoarseningHierarchy) -> ChebNetModel:
    """Seeded symmetric-uniform initialization; biases start at zero."""
    if h.n_levels < N_CONV_LAYERS:
        raise ConfigurationError(
            f"hierarchy has {h.n_levels} levels, need at least {N_CONV_LAYERS}")
    laps = [rescaled_laplacian(h.levels[l], cfg.laplacian_kind)
            for l in range(N_CONV_LAYERS)]
    rng = np.random.default_rng(cfg.seed)
    channels = (1,) + cfg.conv_channels
    conv_theta = []
    conv_bias = []
    for l in range(N_CONV_LAYERS):
        f_in, f_out = channels[l], channels[l + 1]
        conv_theta.append(_glorot(rng, (cfg.K, f_in, f_out), cfg.K * f_in, f_out))
        conv_bias.append(np.zeros(f_out))
    flat_in = h.levels[N_CONV_LAYERS].n * cfg.conv_channels[-1]
    fc1_w = _glorot(rng, (flat_in, cfg.fc_width), flat_in, cfg.fc_width)
    fc2_w = _glorot(rng, (cfg.fc_width, cfg.n_classes), cfg.fc_width, cfg.n_classes)
    dropout_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(1,)))
    return ChebNetModel(cfg, h, laps, conv_theta, conv_bias,
                        fc1_w, np.zeros(cfg.fc_width),
                        fc2_w, np.zeros(cfg.n_classes),
                        dropout_rng=dropout_rng)


def _chebyshev_stack(lap: LaplacianOp, x: np.ndarray, order: int) -> np.ndarray:
    """T_k(L~) applied to x for k = 0..order-1.

    x arrives as (B, n, F); the result is (order, n, B*F) so each recursion
    step is a single sparse matvec against an (n, B*F) block.
    """
    b, n, f = x.shape
    x0 = np.ascontiguousarray(x.transpose(1, 0, 2)).reshape(n, b * f)
    stack = np.empty((order, n, b * f))
    stack[0] = x0
    if order > 1:
        stack[1] = lap.entries @ x0
    for k in range(2, order):
        stack[k] = 2.0 * (lap.entries @ stack[k - 1]) - stack[k - 2]
    return stack


def _conv_forward(lap: LaplacianOp, x: np.ndarray, theta: np.ndarray,
                  bias: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One graph-conv layer: (B, n, F_in) -> (B, n, F_out), plus the T stack."""
    b, n, f_in = x.shape
    order, _, f_out = theta.shape
    stack = _chebyshev_stack(lap, x, order)
    tstack = stack.reshape(order, n, b, f_in)
    xbar = np.ascontiguousarray(tstack.transpose(2, 1, 0, 3)).reshape(b * n, order * f_in)
    y = (xbar @ theta.reshape(order * f_in, f_out)).reshape(b, n, f_out)
    return y + bias, tstack


def _conv_backward_input(lap: LaplacianOp, d_out: np.ndarray,
                         theta: np.ndarray) -> np.ndarray:
    """Gradient through the Chebyshev recursion via its adjoint.

    Reverse of X_k = 2 L~ X_{k-1} - X_{k-2} (X_1 = L~ X_0): accumulate
    b_k = A_k + 2 L~ b_{k+1} - b_{k+2} downward, where A_k is the direct
    contribution d_out theta_k^T; dX = A_0 + L~ b_1 - b_2.
    """
    b, n, f_out = d_out.shape
    order, f_in, _ = theta.shape

    def a_term(k: int) -> np.ndarray:
        g = d_out @ theta[k].T                      # (B, n, F_in)
        return np.ascontiguousarray(g.transpose(1, 0, 2)).reshape(n, b * f_in)

    if order == 1:
        dx = a_term(0)
    else:
        b_next = a_term(order - 1)                  # b_{K-1}
        b_next2 = np.zeros_like(b_next)             # b_K = 0
        for k in range(order - 2, 0, -1):
            b_cur = a_term(k) + 2.0 * (lap.entries @ b_next) - b_next2
            b_next, b_next2 = b_cur, b_next
        dx = a_term(0) + (lap.entries @ b_next) - b_next2
    return np.ascontiguousarray(dx.reshape(n, b, f_in).transpose(1, 0, 2))


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _permute_batch(m: ChebNetModel, x_batch: np.ndarray) -> np.ndarray:
    """(B, n_real) -> (B, n_padded, 1) in pooling order, zeros on fake rows."""
    h = m.hierarchy
    out = np.zeros((x_batch.shape[0], len(h.perm), 1))
    real = h.perm < h.n_real
    out[:, real, 0] = x_batch[:, h.perm[real]]
    return out


def _check_batch(m: ChebNetModel, x_batch: np.ndarray) -> np.ndarray:
    x = np.asarray(x_batch, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim == 3 and x.shape[2] == 1:
        x = x[:, :, 0]
    if x.ndim != 2 or x.shape[1] != m.n_real:
        raise DimensionError(
            f"batch shape {np.shape(x_batch)} does not match {m.n_real} real nodes")
    return x


def forward(m: ChebNetModel, x_batch: np.ndarray, train_mode: bool = False,
            dropout_rng: np.random.Generator | None = None):
    """Run the network; returns (probabilities, cache-or-None).

    The cache is built only in train mode. `dropout_rng` overrides the
    model's seeded mask stream (used to freeze masks for gradient checks).
    """
    x = _check_batch(m, x_batch)
    b = x.shape[0]
    act = _permute_batch(m, x)

    tstacks, pres, argmaxes = [], [], []
    for l in range(N_CONV_LAYERS):
        pre, tstack = _conv_forward(m.laplacians[l], act, m.conv_theta[l], m.conv_bias[l])
        post = np.maximum(pre, 0.0)
        n_half = post.shape[1] // 2
        grouped = post.reshape(b, n_half, 2, post.shape[2])
        arg = grouped.argmax(axis=2)
        act = grouped.max(axis=2)
        if train_mode:
            tstacks.append(tstack)
            pres.append(pre)
            argmaxes.append(arg)

    flat = act.reshape(b, -1)
    z1 = flat @ m.fc1_weight + m.fc1_bias
    a1 = np.maximum(z1, 0.0)
    if train_mode and m.cfg.dropout_keep < 1.0:
        rng = dropout_rng if dropout_rng is not None else m.dropout_rng
        keep = m.cfg.dropout_keep
        mask = (rng.random(a1.shape) < keep) / keep
    else:
        mask = np.ones_like(a1)
    h1 = a1 * mask
    z2 = h1 @ m.fc2_weight + m.fc2_bias
    probs = _softmax(z2)

    if not train_mode:
        return probs, None
    cache = ForwardCache(b, tstacks, pres, argmaxes, flat, z1, mask, h1, probs)
    return probs, cache


def backward(m: ChebNetModel, cache: ForwardCache, labels) -> dict:
    """Exact gradients of mean cross-entropy over the batch."""
    if cache is None or not isinstance(cache, ForwardCache):
        raise ContractError("backward needs the cache from a train-mode forward call")
    labels = np.asarray(labels, dtype=int)
    b = cache.batch_size
    if labels.shape != (b,):
        raise DimensionError(f"{labels.shape} labels for batch of {b}")
    n_classes = m.cfg.n_classes
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= n_classes:
        raise ValidationError("label index outside [0, n_classes)")
    if len(cache.conv_tstack) != N_CONV_LAYERS:
        raise ContractError("cache was not produced in train mode")

    grads: dict = {}
    dz2 = cache.probs.copy()
    dz2[np.arange(b), labels] -= 1.0
    dz2 /= b
    grads["fc2_weight"] = cache.fc2_input.T @ dz2
    grads["fc2_bias"] = dz2.sum(axis=0)
    dh1 = dz2 @ m.fc2_weight.T
    da1 = dh1 * cache.dropout_mask
    dz1 = da1 * (cache.fc1_pre > 0.0)
    grads["fc1_weight"] = cache.flat.T @ dz1
    grads["fc1_bias"] = dz1.sum(axis=0)
    dact = dz1 @ m.fc1_weight.T
    dact = dact.reshape(b, m.hierarchy.levels[N_CONV_LAYERS].n, m.cfg.conv_channels[-1])

    for l in range(N_CONV_LAYERS - 1, -1, -1):
        pre = cache.conv_pre[l]
        arg = cache.pool_argmax[l]
        n_half, f_out = dact.shape[1], dact.shape[2]
        dpost = np.zeros((b, n_half, 2, f_out))
        np.put_along_axis(dpost, arg[:, :, None, :], dact[:, :, None, :], axis=2)
        dpre = dpost.reshape(b, 2 * n_half, f_out) * (pre > 0.0)
        tstack = cache.conv_tstack[l]
        grads[f"conv{l + 1}_theta"] = np.einsum("kvbi,bvo->kio", tstack, dpre)
        grads[f"conv{l + 1}_bias"] = dpre.sum(axis=(0, 1))
        if l > 0:
            dact = _conv_backward_input(m.laplacians[l], dpre, m.conv_theta[l])
    return grads


def predict(m: ChebNetModel, x_batch: np.ndarray) -> np.ndarray:
    """Most-probable class per sample; ties break toward the lower index."""
    probs, _ = forward(m, x_batch, train_mode=False)
    return np.argmax(probs, axis=1)


def save_model(m: ChebNetModel, path) -> None:
    """Single-file binary snapshot; parameter round-trip is bit-exact."""
    h = m.hierarchy
    arrays: dict = {
        "format_version": np.int64(MODEL_FORMAT_VERSION),
        "config_json": np.frombuffer(
            json.dumps(m.cfg.to_dict()).encode(), dtype=np.uint8),
        "n_levels": np.int64(h.n_levels),
        "n_real": np.int64(h.n_real),
        "perm": h.perm,
        "fake_counts": np.asarray(h.fake_counts, dtype=np.int64),
    }
    for l, g in enumerate(h.levels):
        if g.edges:
            src, dst, w = zip(*g.edges)
        else:
            src, dst, w = (), (), ()
        arrays[f"level{l}_n"] = np.int64(g.n)
        arrays[f"level{l}_src"] = np.asarray(src, dtype=np.int64)
        arrays[f"level{l}_dst"] = np.asarray(dst, dtype=np.int64)
        arrays[f"level{l}_w"] = np.asarray(w, dtype=np.float64)
        arrays[f"level{l}_fake"] = np.asarray(g.fake, dtype=bool)
    for l, lap in enumerate(m.laplacians):
        entries = lap.entries
        arrays[f"lap{l}_data"] = entries.data
        arrays[f"lap{l}_indices"] = entries.indices
        arrays[f"lap{l}_indptr"] = entries.indptr
        arrays[f"lap{l}_lambda"] = np.float64(lap.lambda_max)
    for name, p in m.params().items():
        arrays[f"param_{name}"] = p
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_model(path) -> ChebNetModel:
    with np.load(path) as data:
        version = int(data["format_version"])
        if version != MODEL_FORMAT_VERSION:
            raise ValidationError(f"unsupported model format version {version}")
        cfg = NetworkConfig.from_dict(json.loads(bytes(data["config_json"]).decode()))
        n_levels = int(data["n_levels"])
        levels = []
        for l in range(n_levels + 1):
            n = int(data[f"level{l}_n"])
            edges = tuple(zip(data[f"level{l}_src"].tolist(),
                              data[f"level{l}_dst"].tolist(),
                              data[f"level{l}_w"].tolist()))
            levels.append(SparseGraph(n, edges, tuple(data[f"level{l}_fake"].tolist())))
        parents = tuple(np.arange(levels[l].n, dtype=np.int64) // 2
                        for l in range(n_levels))
        h = CoarseningHierarchy(tuple(levels), parents, data["perm"],
                                tuple(data["fake_counts"].tolist()), int(data["n_real"]))
        laps = []
        for l in range(N_CONV_LAYERS):
            entries = sp.csr_array(
                (data[f"lap{l}_data"], data[f"lap{l}_indices"], data[f"lap{l}_indptr"]),
                shape=(levels[l].n, levels[l].n))
            laps.append(LaplacianOp(levels[l].n, cfg.laplacian_kind, entries,
                                    lambda_max=float(data[f"lap{l}_lambda"]),
                                    rescaled=True))
        conv_theta = [data[f"param_conv{l + 1}_theta"].copy() for l in range(N_CONV_LAYERS)]
        conv_bias = [data[f"param_conv{l + 1}_bias"].copy() for l in range(N_CONV_LAYERS)]
        model = ChebNetModel(
            cfg, h, laps, conv_theta, conv_bias,
            data["param_fc1_weight"].copy(), data["param_fc1_bias"].copy(),
            data["param_fc2_weight"].copy(), data["param_fc2_bias"].copy(),
            dropout_rng=np.random.default_rng(
                np.random.SeedSequence(cfg.seed, spawn_key=(1,))))
    return model
