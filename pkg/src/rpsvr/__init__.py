"""Reward-cum-penalty eps-SVR and the standard eps-SVR baseline."""

from .data import Dataset, ScalingState, SplitPlan, apply_scaling, fit_scaling, load_csv, make_folds, write_csv
from .errors import ConvergenceError, IngestionError, RPSVRError, ValidationError
from .kernels import KernelSpec, cross_kernel, gram, kernel_eval
from .losses import LossParams, eps_insensitive, influence, rp_density, rp_loss, rp_normalizer
from .metrics import MetricReport, evaluate
from .svr import HyperParams, Model, compute_bias, fit, load_model, predict, save_model, sparsity_percent, verify_propositions
from .synth import SynthSpec, generate, sinc

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError", "Dataset", "HyperParams", "IngestionError", "KernelSpec", "LossParams",
    "MetricReport", "Model", "RPSVRError", "ScalingState", "SplitPlan", "SynthSpec",
    "ValidationError", "apply_scaling", "compute_bias", "cross_kernel", "eps_insensitive",
    "evaluate", "fit", "fit_scaling", "generate", "gram", "influence", "kernel_eval",
    "load_csv", "load_model", "make_folds", "predict", "rp_density", "rp_loss",
    "rp_normalizer", "save_model", "sinc", "sparsity_percent", "verify_propositions",
    "write_csv",
]
