"""
Monte-Carlo efficiency check
============================

Repeat the tracking over many noise draws of one trajectory and compare the
RMSE with the root of the bound at every step.
"""

import sys

import numpy as np

from toaloc import DEFAULT_ANCHORS, McSpec, TrajectorySpec, run_monte_carlo

steps, trials = (3000, 5000) if "--full" in sys.argv else (300, 200)
report = run_monte_carlo(TrajectorySpec(steps=steps), DEFAULT_ANCHORS, McSpec(trials=trials))

tail = slice(-max(50, steps // 6), None)
print(f"{trials} trials, {steps} steps")
print("RMSE / bound, position:", np.mean(report.pos_rmse[tail] / report.pos_crlb_root[tail]))
print("RMSE / bound, biases:  ", np.mean(report.bias_rmse[tail] / report.bias_crlb_root[tail], axis=0))
print("steps with unconverged trials:", int(np.count_nonzero(report.flagged)))
