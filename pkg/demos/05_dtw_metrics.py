#!/usr/bin/env python3
# Dynamic time warping three ways: the exact O(nm) recurrence, the
# exhaustive brute-force oracle, and the multilevel FastDTW approximation.

import numpy as np

from tscast.metrics import dtw_bruteforce, dtw_exact, dtw_exact_path, fastdtw, mae_metric

a = np.array([1.0, 2.0, 3.0])
b = np.array([2.0, 3.0, 4.0])
print("dtw([1,2,3], [2,3,4]) =", dtw_exact(a, b))
print("brute force agrees    =", dtw_bruteforce(a, b))

cost, path = dtw_exact_path(a, b)
print("one optimal warp path:", path)

# A shifted sine aligns almost perfectly under warping even though the
# pointwise error is large.
t = np.linspace(0.0, 4.0 * np.pi, 60)
wave = np.sin(t)
shifted = np.sin(t - 0.6)
print(f"MAE(sine, shifted)  = {mae_metric(wave, shifted):.3f}")
print(f"DTW(sine, shifted)  = {dtw_exact(wave, shifted):.3f}")

# FastDTW coarsens by pairwise averaging, solves the small problem, then
# refines around the projected path. Its cost never drops below exact,
# and a radius covering the matrix reproduces exact.
rng = np.random.default_rng(5)
x = np.cumsum(rng.normal(size=50))
y = np.cumsum(rng.normal(size=50))
exact = dtw_exact(x, y)
for radius in (0, 1, 2, 5, 50):
    approx = fastdtw(x, y, radius)
    print(f"radius {radius:2d}: cost {approx:9.4f}  (exact {exact:.4f}, "
          f"ratio {approx / exact:.4f})")
