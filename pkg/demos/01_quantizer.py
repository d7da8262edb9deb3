"""Affine per-tensor quantization on a small tensor.

Walks through step size and zero point, then shows the round-trip error
staying within half a step.
"""

import numpy as np

from aweq import compute_quant_params, dequantize, quantize

x = np.array([[-1.0, -0.3, 0.0], [0.25, 0.8, 1.5]])

for bits in (8, 4, 3):
    p = compute_quant_params(x.min(), x.max(), bits)
    q = quantize(x, p)
    err = np.abs(dequantize(q) - x).max()
    print(f"{bits}-bit: step={p.step:.5f} zero_point={p.zero_point} codes={q.codes.ravel().tolist()}")
    print(f"        max error {err:.5f} (half step {p.step / 2:.5f})")
