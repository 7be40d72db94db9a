"""Small dense linear algebra: Householder QR, orthogonal application, back-substitution.

Every routine accepts a leading batch shape (``a[..., m, n]``) and works
elementwise over it, so a Monte-Carlo batch of tiny problems is processed with
one set of numpy calls. The arithmetic is written out explicitly (no BLAS
matmul) which keeps each batch element bitwise independent of the others.
"""

from dataclasses import dataclass

import numpy as np

SINGULARITY_TOL = 1e-12


class SingularTriangular(ValueError):
    """Raised when a triangular factor has a (relatively) zero pivot."""

    def __init__(self, index, message=None):
        self.index = int(index)
        super().__init__(message or f"singular triangular factor at diagonal index {self.index}")


@dataclass(frozen=True)
class QrFactor:
    """Householder QR of an ``m x n`` matrix (``m >= n``).

    ``reflectors[..., j, :]`` is the unit vector ``v_j`` of ``H_j = I - 2 v_j v_j^T``
    (entries before ``j`` are zero; an all-zero vector stands for ``H_j = I``).
    ``q = H_0 H_1 ... H_{n-1}`` and ``q^T a = r``.
    """

    reflectors: np.ndarray
    r: np.ndarray

    @property
    def q(self):
        m = self.r.shape[-2]
        eye = np.broadcast_to(np.eye(m), self.r.shape[:-2] + (m, m))
        return apply_q(self, eye)

    @property
    def r_square(self):
        n = self.r.shape[-1]
        return self.r[..., :n, :]


def householder_qr(a):
    """Factor ``a`` (shape ``(..., m, n)``, ``m >= n``) without pivoting.

    A zero column produces an identity reflector and an exact zero on the
    diagonal of ``r``; rank deficiency is left for the caller to detect.
    """
    r = np.array(a, dtype=float, copy=True)
    m, n = r.shape[-2:]
    if m < n:
        raise ValueError(f"householder_qr needs rows >= cols, got {m}x{n}")
    reflectors = np.zeros(r.shape[:-2] + (n, m))
    for j in range(n):
        x = r[..., j:, j]
        # Build the reflector from the max-scaled column so it stays unit
        # length even for tiny or huge entries.
        scale = np.max(np.abs(x), axis=-1)
        nonzero = scale > 0.0
        xs = x / np.where(nonzero, scale, 1.0)[..., None]
        norm_xs = np.sqrt(np.sum(xs * xs, axis=-1))
        alpha = np.where(xs[..., 0] >= 0.0, -norm_xs, norm_xs)
        v = xs.copy()
        v[..., 0] -= alpha
        norm_v = np.sqrt(np.sum(v * v, axis=-1))
        v = np.where(nonzero[..., None], v / np.where(nonzero, norm_v, 1.0)[..., None], 0.0)
        alpha = alpha * scale
        reflectors[..., j, j:] = v
        if j + 1 < n:
            block = r[..., j:, j + 1:]
            w = np.sum(v[..., :, None] * block, axis=-2)
            r[..., j:, j + 1:] = block - 2.0 * v[..., :, None] * w[..., None, :]
        r[..., j, j] = np.where(nonzero, alpha, x[..., 0])
        r[..., j + 1:, j] = 0.0
    return QrFactor(reflectors=reflectors, r=r)


def _check_rows(f, v):
    m = f.reflectors.shape[-1]
    if v.ndim < 2 or v.shape[-2] != m:
        raise ValueError(f"dimension mismatch: factor has {m} rows, operand has shape {v.shape}")


def apply_qt(f, v):
    """Return ``q^T v`` for ``v`` of shape ``(..., m, p)``."""
    v = np.array(v, dtype=float, copy=True)
    _check_rows(f, v)
    for j in range(f.reflectors.shape[-2]):
        h = f.reflectors[..., j, :, None]
        v = v - 2.0 * h * np.sum(h * v, axis=-2, keepdims=True)
    return v


def apply_q(f, v):
    """Return ``q v``; reflectors are applied in reverse order."""
    v = np.array(v, dtype=float, copy=True)
    _check_rows(f, v)
    for j in reversed(range(f.reflectors.shape[-2])):
        h = f.reflectors[..., j, :, None]
        v = v - 2.0 * h * np.sum(h * v, axis=-2, keepdims=True)
    return v


def singular_pivots(r, tol=SINGULARITY_TOL):
    """Boolean mask ``(..., n)`` of diagonal entries with ``|r_ii| <= tol * max|r_jj|``."""
    diag = np.abs(np.diagonal(r, axis1=-2, axis2=-1))
    return diag <= tol * np.max(diag, axis=-1, keepdims=True)


def solve_upper_triangular(r, rhs, tol=SINGULARITY_TOL, check=True):
    """Back-substitution for ``r x = rhs``.

    ``rhs`` may be a vector batch ``(..., n)`` or a matrix batch ``(..., n, p)``.
    With ``check=True`` a pivot failing the relative tolerance raises
    :class:`SingularTriangular`; with ``check=False`` the caller is expected to
    have masked those elements (their output is undefined, possibly inf/nan).
    """
    r = np.asarray(r, dtype=float)
    n = r.shape[-1]
    if r.shape[-2] != n:
        raise ValueError(f"r must be square, got {r.shape[-2:]}")
    rhs = np.asarray(rhs, dtype=float)
    vector = rhs.ndim == r.ndim - 1
    b = rhs[..., None] if vector else rhs
    if b.shape[-2] != n:
        raise ValueError(f"rhs has {b.shape[-2]} rows, r has {n}")
    if check:
        bad = singular_pivots(r, tol)
        if np.any(bad):
            raise SingularTriangular(np.nonzero(np.any(bad.reshape(-1, n), axis=0))[0][0])
    shape = np.broadcast_shapes(r.shape[:-2], b.shape[:-2]) + b.shape[-2:]
    x = np.zeros(shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        for i in reversed(range(n)):
            acc = b[..., i, :]
            for j in range(i + 1, n):
                acc = acc - r[..., i, j, None] * x[..., j, :]
            x[..., i, :] = acc / r[..., i, i, None]
    return x[..., 0] if vector else x
