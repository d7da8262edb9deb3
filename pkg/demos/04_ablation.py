"""Base / +BC / +AWE / AWEQ ablation on the synthetic outlier benchmark.

A 64-256-256-64 ReLU MLP is fed activations with one channel 50x larger
than the rest. The table prints median end-to-end MSE over a few seeds.
"""

from aweq.ablation import median_mse, run_benchmark

tables = run_benchmark(range(5))
med = median_mse(tables)
base = med["W8A8"]
for name, mse in med.items():
    rel = "" if name == "FP" else f"  ({mse / base:.2f} x base)"
    print(f"{name:10s} {mse:.4e}{rel}")

# per-layer objective before and after equalization from the first seed
for k, d in enumerate(tables[0]["AWEQ"].report.info["layers"]):
    print(f"layer {k}: objective {d['objective_before']:.3f} -> {d['objective_after']:.3f} ({d['placement']})")
