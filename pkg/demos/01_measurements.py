"""
Biased range measurements
=========================

Two receivers, each with two antennas a couple of meters apart, sit below
the working area. A target at (0, 50) is observed through four ranges that
all carry the receiver's clock offset.
"""

import numpy as np

from toaloc import DEFAULT_ANCHORS, NoiseSpec, bias_matrix, range_vector, synthesize

x = np.array([0.0, 50.0])
print("antenna positions:\n", DEFAULT_ANCHORS.positions)

# True geometric ranges
print("ranges:", range_vector(x, DEFAULT_ANCHORS))

# Each receiver adds its own offset to both of its antennas
print("bias map:\n", bias_matrix())

frame = synthesize(x, DEFAULT_ANCHORS, (5.0, -5.0), NoiseSpec(0.0), k=1)
print("noiseless biased frame:", frame.z)

# The range difference within one receiver cancels its offset
print("in-receiver differences:", frame.z[0] - frame.z[1], frame.z[2] - frame.z[3])

noisy = synthesize(x, DEFAULT_ANCHORS, (5.0, -5.0), NoiseSpec(1e-2, seed=3), k=1)
print("noisy frame (sigma = 1 cm):", noisy.z)
