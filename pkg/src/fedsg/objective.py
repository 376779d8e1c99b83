"""The federated low-rank objective and its Euclidean gradients.

With U (d x k) and V (B x k) orthonormal and shards X_i (d x B), the
per-shard core is C_i = U^T X_i V (the closed-form optimal middle
factor), the reconstruction is U C_i V^T, and the loss is
sum_i ||X_i - U U^T X_i V V^T||_F^2.

Gradients are derived from this loss and hold for arbitrary (also
non-orthonormal) U, V, so they agree with finite differences of
raw_loss in every direction.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch
from .grassmann import GrassmannPoint


@dataclass(frozen=True)
class FactorPair:
    """Global model: column subspace u on G(d,k), row subspace v on G(B,k)."""

    u: GrassmannPoint
    v: GrassmannPoint

    def __post_init__(self):
        if self.u.k != self.v.k:
            raise ShapeMismatch(f"u has k={self.u.k} but v has k={self.v.k}")


def _basis(a):
    return a.basis if isinstance(a, GrassmannPoint) else np.asarray(a, dtype=float)


def _check_shard(u, v, x):
    if x.ndim != 2 or x.shape[0] != u.shape[0] or x.shape[1] != v.shape[0]:
        raise ShapeMismatch(
            f"shard shape {x.shape} incompatible with u {u.shape}, v {v.shape}"
        )


def optimal_sigma(u, x, v) -> np.ndarray:
    """Closed-form minimizer of ||X - U S V^T||_F^2 over S: U^T X V."""
    ub, vb = _basis(u), _basis(v)
    x = np.asarray(x, dtype=float)
    _check_shard(ub, vb, x)
    return ub.T @ x @ vb


def reconstruct(u, x, v) -> np.ndarray:
    """Project X onto the learned column and row subspaces: U U^T X V V^T."""
    ub, vb = _basis(u), _basis(v)
    x = np.asarray(x, dtype=float)
    _check_shard(ub, vb, x)
    return ub @ (ub.T @ x @ vb) @ vb.T


def loss(u, v, shards) -> float:
    """Sum over shards of the squared Frobenius residual, accumulated in
    shard-index order for determinism."""
    ub, vb = _basis(u), _basis(v)
    total = 0.0
    for x in shards:
        x = np.asarray(x, dtype=float)
        _check_shard(ub, vb, x)
        r = x - ub @ (ub.T @ x @ vb) @ vb.T
        total += float(np.sum(r * r))
    return total


def grad_u(u, v, shards) -> np.ndarray:
    """Euclidean gradient of loss with respect to U.

    For R = X - U U^T X Q with Q = V V^T:
        dL/dU = -2 sum_i (R_i Q X_i^T U + X_i Q R_i^T U).
    The second term vanishes when U is orthonormal but is kept so the
    gradient is exact at any U.
    """
    ub, vb = _basis(u), _basis(v)
    g = np.zeros_like(ub)
    for x in shards:
        x = np.asarray(x, dtype=float)
        _check_shard(ub, vb, x)
        xv = x @ vb                       # d x k
        xq = xv @ vb.T                    # X V V^T, d x B
        r = x - ub @ (ub.T @ xq)          # residual, d x B
        g -= 2.0 * ((r @ vb) @ (xv.T @ ub) + xq @ (r.T @ ub))
    return g


def grad_v(u, v, shards) -> np.ndarray:
    """Euclidean gradient of loss with respect to V.

    For R = X - P X V V^T with P = U U^T:
        dL/dV = -2 sum_i (X_i^T P R_i V + R_i^T P X_i V).
    """
    ub, vb = _basis(u), _basis(v)
    g = np.zeros_like(vb)
    for x in shards:
        x = np.asarray(x, dtype=float)
        _check_shard(ub, vb, x)
        px = ub @ (ub.T @ x)              # P X, d x B
        r = x - (px @ vb) @ vb.T          # residual, d x B
        g -= 2.0 * ((px.T @ r) @ vb + (r.T @ px) @ vb)
    return g
