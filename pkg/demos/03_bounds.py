"""
Lower bounds along a trajectory
===============================

The bias bounds shrink as frames accumulate. The position bound follows
them down, since the unknown offsets dominate the error of a single fix.
"""

import numpy as np

from toaloc import DEFAULT_ANCHORS, TrajectorySpec, crlb_trajectory, generate_trajectory

traj = generate_trajectory(TrajectorySpec(steps=3000))
bounds = crlb_trajectory(traj, DEFAULT_ANCHORS, sigma=1e-2)

for k in (1, 2, 10, 100, 1000, 3000):
    print(f"k={k:5d}  position {np.sqrt(bounds.pos[k - 1]):.5f} m  "
          f"bias1 {np.sqrt(bounds.bias1[k - 1]):.6f} m  bias2 {np.sqrt(bounds.bias2[k - 1]):.6f} m")

print("bias bounds never increase:",
      bool(np.all(np.diff(bounds.bias1) <= 0) and np.all(np.diff(bounds.bias2) <= 0)))
