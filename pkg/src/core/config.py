"""
Configuration constants for MSGC training, accounting and analysis.
"""

# Batch normalization (used by the backbone and by the mask generators)
BATCH_NORM_PARAMS = {
    "eps": 1e-5,
    "momentum": 0.1,          # weight of the new batch in the running average
}

# Gating / mask generation
GATING_PARAMS = {
    "gumbel_temperature": 2.0 / 3.0,
    "saliency_bias_init": 3.0,   # start with (almost) every channel selected
    "attention_bias_init": 0.0,
    "mlp_weight_std": 0.01,
    "noise_clip": 1e-12,         # uniform draws closer than this to 0/1 are resampled
}

# Budget loss and tau schedule
BUDGET_PARAMS = {
    "lambda": 30.0,
    "tau_start": 1.0,
    "tau_end": 0.5,
    "warm_fraction": 0.5,
}

# Inference-gate calibration after the last epoch
CALIBRATION_PARAMS = {
    "max_shift": 16.0,       # bisection range for the common saliency bias offset
    "steps": 40,
    "tolerance": 0.002,      # stop once the eval MAC ratio is this close to the target
    "max_samples": 1024,     # training samples used to measure the ratio
}

# SGD parameter groups
OPTIMIZER_PARAMS = {
    "momentum": 0.9,
    "lr_mlp": 0.075,
    "lr_backbone": 0.015,
    "weight_decay_mlp": 0.0,
    "weight_decay_backbone": 1e-4,
}

# Parameter-name segments routed to the mask/attention MLP group
MLP_PARAM_SCOPES = ("gate", "attention")

# Full set of RunConfig keys with defaults (data-io RunConfig format)
DEFAULT_RUN_CONFIG = {
    "data": "data/train.msgd",
    "val_data": "data/val.msgd",
    "model": "msgc",
    "widths": [16, 32, 64],
    "strides": [1, 2, 2],
    "stem_width": 16,
    "input_size": 32,
    "in_channels": 3,
    "num_classes": 8,
    "groups": [1, 4],
    "attention_layers": [1, 2],
    "reduction": 4,
    "lambda": BUDGET_PARAMS["lambda"],
    "tau_end": BUDGET_PARAMS["tau_end"],
    "warm_fraction": BUDGET_PARAMS["warm_fraction"],
    "epochs": 40,
    "batch_size": 64,
    "lr_mlp": OPTIMIZER_PARAMS["lr_mlp"],
    "lr_backbone": OPTIMIZER_PARAMS["lr_backbone"],
    "momentum": OPTIMIZER_PARAMS["momentum"],
    "weight_decay": OPTIMIZER_PARAMS["weight_decay_backbone"],
    "seed": 0,
    "gumbel_temperature": GATING_PARAMS["gumbel_temperature"],
    "saliency_bias_init": GATING_PARAMS["saliency_bias_init"],
    "augment": True,
    "calibrate_gates": True,
    "dtype": "float32",
    "output": "runs/model.ckpt",
    "log": "runs/train_log.csv",
    "gradcheck_trials": 20,
}

# Synthetic texture dataset
SYNTH_PARAMS = {
    "classes": 8,
    "noise": 0.2,
    "size": 32,
    "channels": 3,
    "contrast_range": (0.5, 1.0),
}

# Gradient checking
GRADCHECK_PARAMS = {
    "tolerance": 1e-4,
    "step": 1e-5,
    "coords_per_tensor": 6,
    "miniature_width": 8,
    "miniature_size": 8,
    "miniature_batch": 4,
    "miniature_classes": 4,
    "saliency_bias_init": 0.0,   # soft masks spread around 0.5
    "budget_lambda": 30.0,
    "budget_tau": 0.1,           # keeps the hinge active
}

# Analysis outputs
ANALYSIS_PARAMS = {
    "histogram_bins": 10,
    "exemplars": 5,
    "float_format": "%.8g",
}

# Visualization parameters
VISUALIZATION_PARAMS = {
    "figure_width": 8,
    "figure_height": 4,
    "heatmap_cmap": "viridis",
    "color_palette": ['red', 'blue', 'green', 'orange', 'purple', 'brown', 'pink', 'gray', 'cyan']
}

# Process exit codes by error family
EXIT_CODES = {
    "config": 2,
    "format": 3,
    "numeric": 4,
    "gradcheck": 5,
    "analysis": 6,
    "io": 7,
}
