"""Weight quantization shifts the mean of a layer's output; bias correction removes it.

Coarse 3-bit weights make the shift easy to see. The correction computed from
the mean input (analytic) and from calibration samples (empirical) agree.
"""

import numpy as np

from aweq import LinearLayer, analytic_correction, apply_correction, empirical_correction
from aweq import compute_quant_params, dequantize, quantize, weight_quant_error

rng = np.random.default_rng(1)
w = rng.standard_normal((16, 4))
layer = LinearLayer(w, np.zeros(4))
x = rng.standard_normal((512, 16)) + 2.0  # non-zero mean inputs

q = quantize(w, compute_quant_params(w.min(), w.max(), 3))
w_tilde = dequantize(q)
c_ana = analytic_correction(weight_quant_error(w, q), x.mean(axis=0))
c_emp = empirical_correction(w, w_tilde, x)
print("analytic correction: ", np.round(c_ana, 4))
print("empirical correction:", np.round(c_emp, 4))

plain = LinearLayer(w_tilde, layer.bias)
fixed = apply_correction(plain, c_emp)
print("mean output error before:", np.round((plain(x) - layer(x)).mean(axis=0), 4))
print("mean output error after: ", np.round((fixed(x) - layer(x)).mean(axis=0), 12))
