"""Spectral graph filters.

Two routes to the same polynomial filter: an exact dense path through the
Laplacian eigendecomposition (the Fourier basis is first-class so it can be
inspected and tested), and a sparse Chebyshev recursion whose cost scales
with the polynomial order times the edge count. A coefficient converter
bridges the monomial and Chebyshev parameterizations so the two routes can
be cross-checked on identical inputs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, ContractError, DimensionError, ValidationError
from .graph import LaplacianOp

MONOMIAL = "monomial"
CHEBYSHEV = "chebyshev"

DEFAULT_DENSE_LIMIT = 2048


@dataclass(frozen=True)
class FilterCoefficients:
    """Polynomial filter coefficients in a declared basis."""

    basis: str
    theta: np.ndarray

    def __post_init__(self):
        if self.basis not in (MONOMIAL, CHEBYSHEV):
            raise ValidationError(f"unknown basis {self.basis!r}")
        theta = np.asarray(self.theta, dtype=np.float64).ravel()
        if theta.size < 1:
            raise ValidationError("filter needs at least one coefficient")
        if not np.all(np.isfinite(theta)):
            raise ValidationError("filter coefficients must be finite")
        theta = theta.copy()
        theta.flags.writeable = False
        object.__setattr__(self, "theta", theta)

    @property
    def order(self) -> int:
        return self.theta.size


@dataclass(frozen=True)
class NodeSignal:
    """Real signal on graph nodes, one column per channel."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise DimensionError(f"node signal must be 1- or 2-d, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("node signal contains non-finite values")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def n_nodes(self) -> int:
        return self.values.shape[0]

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]


def fourier_basis(lap: LaplacianOp) -> tuple[np.ndarray, np.ndarray]:
    """Dense eigendecomposition of the Laplacian: (eigenvalues, eigenvectors)."""
    w, u = np.linalg.eigh(lap.dense())
    return w, u


def exact_spectral_filter(lap: LaplacianOp, x: NodeSignal,
                          theta: FilterCoefficients,
                          dense_limit: int = DEFAULT_DENSE_LIMIT) -> NodeSignal:
    """Polynomial filter evaluated through the graph Fourier basis.

    Computes sum_k theta_k U Lambda^k U^T x, which equals sum_k theta_k
    L^k x. O(n^2) per application; exists as the correctness oracle and
    benchmark reference, so it is size-capped.
    """
    if theta.basis != MONOMIAL:
        raise ContractError("exact filter expects monomial-basis coefficients")
    if lap.n > dense_limit:
        raise CapabilityError(
            f"dense spectral filter capped at n={dense_limit} (got n={lap.n}); "
            "use the Chebyshev path for larger graphs")
    if x.n_nodes != lap.n:
        raise DimensionError(
            f"signal has {x.n_nodes} rows but laplacian has {lap.n} nodes")
    lam, u = fourier_basis(lap)
    # Horner evaluation of the monomial polynomial on each eigenvalue.
    poly = np.zeros_like(lam)
    for coef in theta.theta[::-1]:
        poly = poly * lam + coef
    xt = u.T @ x.values
    return NodeSignal(u @ (poly[:, None] * xt))


def chebyshev_filter(lap_rescaled: LaplacianOp, x: NodeSignal,
                     theta: FilterCoefficients) -> NodeSignal:
    """Polynomial filter via the Chebyshev three-term recursion.

    T_0 x = x, T_1 x = L~ x, T_k x = 2 L~ T_{k-1} x - T_{k-2} x; the output
    is sum_k theta_k T_k(L~) x. Each step is one sparse matvec, so the cost
    grows with order times edge count rather than n^2.
    """
    if theta.basis != CHEBYSHEV:
        raise ContractError("chebyshev filter expects chebyshev-basis coefficients")
    if not lap_rescaled.rescaled:
        raise ContractError("chebyshev filter requires a rescaled laplacian")
    if x.n_nodes != lap_rescaled.n:
        raise DimensionError(
            f"signal has {x.n_nodes} rows but laplacian has {lap_rescaled.n} nodes")
    return NodeSignal(_cheb_apply(lap_rescaled, x.values, theta.theta))


def _cheb_apply(lap: LaplacianOp, x: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    a = lap.entries
    t_prev = x
    out = coeffs[0] * t_prev
    if coeffs.size == 1:
        return out.copy()
    t_cur = a @ x
    out = out + coeffs[1] * t_cur
    for k in range(2, coeffs.size):
        t_next = 2.0 * (a @ t_cur) - t_prev
        out = out + coeffs[k] * t_next
        t_prev, t_cur = t_cur, t_next
    return out


def chebyshev_from_monomial(theta_mono: FilterCoefficients) -> FilterCoefficients:
    """Re-express monomial coefficients in the Chebyshev basis.

    Uses x * T_j = (T_{j+1} + T_{j-1}) / 2 to expand each power of x, so
    both filter routes produce identical output on any rescaled Laplacian.
    """
    if theta_mono.basis != MONOMIAL:
        raise ContractError("conversion expects monomial-basis coefficients")
    k = theta_mono.order
    out = np.zeros(k)
    # power = Chebyshev expansion of x^j, grown one multiplication at a time
    power = np.zeros(k)
    power[0] = 1.0
    out += theta_mono.theta[0] * power
    for j in range(1, k):
        nxt = np.zeros(k)
        if power[0] != 0.0:
            nxt[1] += power[0]
        for m in range(1, k):
            c = power[m]
            if c == 0.0:
                continue
            if m + 1 < k:
                nxt[m + 1] += 0.5 * c
            nxt[m - 1] += 0.5 * c
        power = nxt
        out += theta_mono.theta[j] * power
    return FilterCoefficients(CHEBYSHEV, out)
