"""Grassmann-manifold geometry: points are n-by-k orthonormal bases
identified up to right rotation; updates use tangent projection followed
by QR retraction."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch
from .linalg import frobenius_norm, thin_qr

# Orthonormality tolerance checked on construction and after retraction.
ORTHO_TOL = 1e-8


@dataclass(frozen=True)
class GrassmannPoint:
    """An orthonormal basis matrix standing for a k-dim subspace of R^n.

    k = n is admitted as the degenerate single-point manifold (the whole
    space); useful for full-rank sanity checks.
    """

    basis: np.ndarray = field(repr=False)

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim != 2 or b.shape[0] < b.shape[1]:
            raise ShapeMismatch(f"basis must be n x k with n >= k, got {b.shape}")
        if not np.all(np.isfinite(b)):
            raise ValueError("basis has non-finite entries")
        gram = b.T @ b - np.eye(b.shape[1])
        err = frobenius_norm(gram)
        if err > ORTHO_TOL:
            raise ValueError(f"basis not orthonormal: ||B^T B - I||_F = {err:.3e}")
        b = b.copy()
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def k(self) -> int:
        return self.basis.shape[1]


def project_tangent(a: GrassmannPoint, g) -> np.ndarray:
    """Project g onto the tangent space at a: (I - A A^T) g."""
    g = np.asarray(g, dtype=float)
    if g.shape != a.basis.shape:
        raise ShapeMismatch(f"gradient shape {g.shape} != basis shape {a.basis.shape}")
    return g - a.basis @ (a.basis.T @ g)


def retract(m) -> GrassmannPoint:
    """Map a full-rank n-by-k matrix back onto the manifold as the Q
    factor of its thin QR; spans are preserved.

    Propagates RankDeficient from thin_qr; callers treat the update as
    failed and keep the previous point.
    """
    q, _ = thin_qr(m)
    return GrassmannPoint(q)


def riemannian_step(a: GrassmannPoint, euclidean_grad, eta: float) -> GrassmannPoint:
    """One gradient step along the manifold: retract(A - eta * tangent)."""
    if eta <= 0.0:
        raise ValueError("eta must be positive")
    return retract(a.basis - eta * project_tangent(a, euclidean_grad))
