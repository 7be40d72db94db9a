"""Cramer-Rao bounds for the positions and the two clock biases.

The Fisher information over ``[x_1, ..., x_k, b]`` is block-arrow shaped:
one ``2 x 2`` block per position on the diagonal, coupled only through the
bias border. Eliminating the position blocks leaves the ``2 x 2`` Schur
complement

    S_k = B_k - sum_l I_{b,l} I_l^{-1} I_{l,b},

whose inverse is the bias bound; the position bound at step ``k`` then follows
from the block-inverse formula. A whole trajectory costs O(k).
"""

from dataclasses import dataclass

import numpy as np

SINGULAR_TOL = 1e-12


class SingularFim(ArithmeticError):
    def __init__(self, message, step=None):
        self.step = step
        super().__init__(message if step is None else f"{message} (step {step})")


@dataclass(frozen=True)
class FimBlocks:
    i_pos: np.ndarray       # (k, 2, 2)
    i_pos_bias: np.ndarray  # (k, 2, 2)
    b_bias: np.ndarray      # (2, 2)
    sigma: float

    @property
    def k(self):
        return self.i_pos.shape[0]


@dataclass(frozen=True)
class CrlbValues:
    pos: np.ndarray    # m^2, trace of the position block
    bias1: np.ndarray  # m^2
    bias2: np.ndarray  # m^2


def fim_step_blocks(x, anchors, sigma):
    """Information blocks ``(I_l, I_{l,b})`` contributed by one step at true position ``x``.

    Entries are the direction-cosine sums over the four antennas; ``x`` may
    carry leading batch dimensions.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    x = np.asarray(x, dtype=float)
    P = anchors.positions
    dx = x[..., 0, None] - P[:, 0]
    dy = x[..., 1, None] - P[:, 1]
    d2 = dx * dx + dy * dy
    if np.any(d2 == 0):
        from .estimator import DegenerateGeometry
        raise DegenerateGeometry("position coincides with an antenna")
    d = np.sqrt(d2)
    w = 1.0 / (sigma * sigma)
    sxx = np.sum(dx * dx / d2, axis=-1)
    sxy = np.sum(dx * dy / d2, axis=-1)
    syy = np.sum(dy * dy / d2, axis=-1)
    i_pos = w * np.stack([np.stack([sxx, sxy], -1), np.stack([sxy, syy], -1)], -2)
    cx, cy = dx / d, dy / d
    i_pos_bias = w * np.stack([
        np.stack([cx[..., 0] + cx[..., 1], cx[..., 2] + cx[..., 3]], -1),
        np.stack([cy[..., 0] + cy[..., 1], cy[..., 2] + cy[..., 3]], -1),
    ], -2)
    return i_pos, i_pos_bias


def fim_blocks(trajectory, anchors, sigma):
    """All blocks for the steps of ``trajectory`` (shape ``(k, 2)``)."""
    trajectory = np.atleast_2d(np.asarray(trajectory, dtype=float))
    i_pos, i_pos_bias = fim_step_blocks(trajectory, anchors, sigma)
    k = len(trajectory)
    return FimBlocks(i_pos, i_pos_bias, np.eye(2) * (2.0 * k / sigma**2), sigma)


def _det2(m):
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


def _inv2(m, det):
    out = np.empty_like(m)
    out[..., 0, 0] = m[..., 1, 1]
    out[..., 1, 1] = m[..., 0, 0]
    out[..., 0, 1] = -m[..., 0, 1]
    out[..., 1, 0] = -m[..., 1, 0]
    return out / det[..., None, None]


def _singular(m, det):
    scale = np.sum(m * m, axis=(-2, -1))
    return np.abs(det) <= SINGULAR_TOL * scale


def _mm(a, b):
    return np.sum(a[..., :, :, None] * b[..., None, :, :], axis=-2)


def _bounds(i_pos, i_pos_bias, cum_coupling, b_diag, first_step=1):
    # i_pos, i_pos_bias: blocks of the last step; cum_coupling: running
    # sum of I_{b,l} I_l^{-1} I_{l,b}; b_diag: 2k / sigma^2, all per step.
    det_i = _det2(i_pos)
    bad = _singular(i_pos, det_i)
    if np.any(bad):
        raise SingularFim("position information block is singular", first_step + int(np.argmax(bad)))
    i_inv = _inv2(i_pos, det_i)
    schur = b_diag[..., None, None] * np.eye(2) - cum_coupling
    det_s = _det2(schur)
    bad = _singular(schur, det_s)
    if np.any(bad):
        raise SingularFim("bias Schur complement is singular", first_step + int(np.argmax(bad)))
    s_inv = _inv2(schur, det_s)
    m = _mm(i_inv, i_pos_bias)
    pos_cov = i_inv + _mm(_mm(m, s_inv), np.swapaxes(m, -1, -2))
    pos = pos_cov[..., 0, 0] + pos_cov[..., 1, 1]
    return CrlbValues(pos, s_inv[..., 0, 0], s_inv[..., 1, 1])


def _coupling(i_pos, i_pos_bias):
    det_i = _det2(i_pos)
    bad = _singular(i_pos, det_i)
    if np.any(bad):
        raise SingularFim("position information block is singular", 1 + int(np.argmax(bad)))
    return _mm(np.swapaxes(i_pos_bias, -1, -2), _mm(_inv2(i_pos, det_i), i_pos_bias))


def crlb_at_step(blocks):
    """Bounds for the last position and both biases given all ``k`` steps of blocks."""
    coupling = np.sum(_coupling(blocks.i_pos, blocks.i_pos_bias), axis=0)
    b_diag = np.float64(blocks.b_bias[0, 0])
    return _bounds(blocks.i_pos[-1], blocks.i_pos_bias[-1], coupling, b_diag, blocks.k)


def crlb_trajectory(trajectory, anchors, sigma):
    """Bounds at every step ``k = 1..N`` of a true trajectory, each using steps ``1..k``."""
    trajectory = np.atleast_2d(np.asarray(trajectory, dtype=float))
    if len(trajectory) == 0:
        raise ValueError("trajectory is empty")
    i_pos, i_pos_bias = fim_step_blocks(trajectory, anchors, sigma)
    cum = np.cumsum(_coupling(i_pos, i_pos_bias), axis=0)
    b_diag = 2.0 * np.arange(1, len(trajectory) + 1) / sigma**2
    return _bounds(i_pos, i_pos_bias, cum, b_diag)


def assemble_fim(blocks):
    """Dense ``(2k+2) x (2k+2)`` information matrix, ordered ``[x_1, ..., x_k, b]``."""
    k = blocks.k
    out = np.zeros((2 * k + 2, 2 * k + 2))
    for l in range(k):
        out[2 * l:2 * l + 2, 2 * l:2 * l + 2] = blocks.i_pos[l]
        out[2 * l:2 * l + 2, 2 * k:] = blocks.i_pos_bias[l]
        out[2 * k:, 2 * l:2 * l + 2] = blocks.i_pos_bias[l].T
    out[2 * k:, 2 * k:] = blocks.b_bias
    return out
