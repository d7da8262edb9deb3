"""AWEQ post-training quantization: activation-weight equalization plus bias correction."""

from .ablation import AblationTable, outlier_benchmark, run_ablation, run_benchmark
from .bias_correction import analytic_correction, apply_correction, empirical_correction, weight_quant_error
from .equalizer import (
    apply_equalization,
    compute_equalization_factors,
    difficulty_objective,
    difficulty_ratios,
    fold_scale_into_previous,
    grid_search_equalization,
)
from .errors import AWEQError
from .layers import LinearLayer, ModelSpec, random_mlp
from .metrics import EvalReport, Metrics, compute_metrics, evaluate
from .model import calibrate, forward_fp, synth_outlier_activations
from .pipeline import QuantConfig, QuantizedModel, equalize_model, forward_quant, quantize_from_stats, quantize_model
from .quantizer import QuantizedMatrix, QuantParams, compute_quant_params, dequantize, fake_quantize, quantize
from .tensor import ChannelStats, accumulate_stats, channel_stats, matmul, tensor_range

__version__ = "0.1.0"
