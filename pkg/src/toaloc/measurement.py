"""Geometry of the two dual-antenna anchors and the biased-range measurement model.

A measurement frame at step ``k`` is the 4-vector of ranges from the target
to antennas ``(1,1), (1,2), (2,1), (2,2)``, each offset by the clock bias of
its receiver (already expressed in meters) plus white Gaussian noise.

Noise mapping (stable contract): the frames of one noise seed come from a
single stream ``numpy.random.default_rng(seed)``; frame ``k`` consumes the
standard normals at stream positions ``4(k-1) .. 4k-1`` in channel order
``z11, z12, z21, z22``, scaled by ``sigma``. Distinct steps therefore use
disjoint blocks of the stream and any prefix of a run is reproducible on its own.
"""

from dataclasses import dataclass

import numpy as np

BIAS_MATRIX = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
BIAS_MATRIX.flags.writeable = False

SPACING_TOL = 1e-9


@dataclass(frozen=True)
class AnchorArray:
    """Antenna positions ``p11, p12`` (receiver 1) and ``p21, p22`` (receiver 2), in meters."""

    p11: tuple
    p12: tuple
    p21: tuple
    p22: tuple
    spacing: float

    def __post_init__(self):
        for name in ("p11", "p12", "p21", "p22"):
            p = tuple(float(c) for c in getattr(self, name))
            if len(p) != 2 or not all(np.isfinite(p)):
                raise ValueError(f"{name} must be a finite 2-D point, got {p}")
            object.__setattr__(self, name, p)
        a = float(self.spacing)
        object.__setattr__(self, "spacing", a)
        if not a > 0:
            raise ValueError(f"antenna spacing must be positive, got {a}")
        for i, (p, q) in enumerate([(self.p11, self.p12), (self.p21, self.p22)], start=1):
            d = float(np.hypot(p[0] - q[0], p[1] - q[1]))
            if abs(d - a) > SPACING_TOL:
                raise ValueError(f"receiver {i} antennas are {d!r} m apart, spacing is {a!r}")
        if float(np.hypot(self.p11[0] - self.p21[0], self.p11[1] - self.p21[1])) <= a:
            raise ValueError("the two receivers are co-located")

    @classmethod
    def from_points(cls, p11, p12, p21, p22):
        """Build an array whose spacing is measured from receiver 1."""
        a = float(np.hypot(p11[0] - p12[0], p11[1] - p12[1]))
        return cls(p11, p12, p21, p22, a)

    @property
    def positions(self):
        """``(4, 2)`` array of antenna positions in measurement order."""
        return np.array([self.p11, self.p12, self.p21, self.p22])


DEFAULT_ANCHORS = AnchorArray((-51.0, -100.0), (-49.0, -100.0), (49.0, -100.0), (51.0, -100.0), 2.0)


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class MeasurementFrame:
    """Biased ranges ``z`` (shape ``(..., 4)``) observed at step ``k >= 1``."""

    z: np.ndarray
    k: int

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.shape[-1:] != (4,):
            raise ValueError(f"frame needs 4 ranges, got shape {z.shape}")
        if not np.all(np.isfinite(z)):
            raise ValueError("frame ranges must be finite")
        if int(self.k) < 1:
            raise ValueError(f"step index must be >= 1, got {self.k}")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "k", int(self.k))


def bias_matrix():
    """The ``4 x 2`` map from ``(b1, b2)`` to per-antenna offsets."""
    return BIAS_MATRIX.copy()


def range_vector(x, anchors):
    """Distances from ``x`` (shape ``(..., 2)``) to the four antennas, shape ``(..., 4)``."""
    d = np.asarray(x, dtype=float)[..., None, :] - anchors.positions
    return np.sqrt(np.sum(d * d, axis=-1))


def noise_block(seed, n_steps):
    """Standard-normal draws for steps ``1..n_steps`` of one seed, shape ``(n_steps, 4)``."""
    return np.random.default_rng(seed).standard_normal((n_steps, 4))


def synthesize(x, anchors, bias, noise, k):
    """One noisy frame ``z = f(x) + A b + n`` at step ``k``.

    Regenerates the seed's stream up to step ``k``; use :func:`synthesize_run`
    for whole trajectories.
    """
    z = range_vector(x, anchors) + np.asarray(bias, dtype=float) @ BIAS_MATRIX.T
    if noise.sigma > 0:
        z = z + noise.sigma * noise_block(noise.seed, k)[k - 1]
    return MeasurementFrame(z, k)


def synthesize_run(trajectory, anchors, bias, noise):
    """Frames for every step of ``trajectory`` (shape ``(N, 2)``) as an ``(N, 4)`` array."""
    trajectory = np.asarray(trajectory, dtype=float)
    z = range_vector(trajectory, anchors) + np.asarray(bias, dtype=float) @ BIAS_MATRIX.T
    if noise.sigma > 0:
        z = z + noise.sigma * noise_block(noise.seed, len(trajectory))
    return z
