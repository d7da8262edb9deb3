"""Activation-weight equalization on an activation with one outlier channel.

The outlier channel dominates the activation range, so every other channel
gets only a few quantization levels. Scaling channels by s = sqrt(r_x / r_w)
moves that difficulty into the weights while leaving X @ W unchanged.
"""

import numpy as np

from aweq import apply_equalization, channel_stats, compute_equalization_factors, difficulty_objective, fake_quantize

rng = np.random.default_rng(0)
x = rng.standard_normal((256, 8))
x[:, 3] *= 40  # the outlier
w = rng.standard_normal((8, 16)) * 0.2

r_x = channel_stats(x).range
r_w = channel_stats(w, "rows").range
s = compute_equalization_factors(r_x, r_w)
xh, wh = apply_equalization(x, w, s)

print("activation channel ranges before:", np.round(r_x, 2))
print("activation channel ranges after: ", np.round(channel_stats(xh).range, 2))
print("scales:", np.round(s, 3))
print(f"objective {difficulty_objective(x, w):.3f} -> {difficulty_objective(xh, wh):.3f}")
print(f"max |X^W^ - XW| = {np.abs(xh @ wh - x @ w).max():.2e}")

ref = x @ w
for name, (a, b) in {"plain": (x, w), "equalized": (xh, wh)}.items():
    mse = np.mean((fake_quantize(a, 8) @ fake_quantize(b, 8) - ref) ** 2)
    print(f"W8A8 output MSE, {name}: {mse:.4e}")
