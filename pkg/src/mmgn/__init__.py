"""Continuous spatiotemporal field reconstruction from sparse observations.

Per-time-step latent codes drive a multiplicative Gabor decoder; the
package also ships four coordinate-network baselines, a small reverse-mode
autodiff engine they are all trained with, sampling tasks, metrics, latent
diagnostics and a command-line harness.
"""

__version__ = "0.1.0"

from .autograd import Graph, backward, gradient_check
from .data import GridField, ObservationSet, generate_synthetic, sample_task
from .experiment import ExperimentSpec, run_experiment
from .inference import InferConfig, evaluate_field, infer_latent, interpolate_latent, reconstruct
from .metrics import compute_metrics, promotion
from .models import LatentTable, MmgnDims, MmgnModel, init_baseline, init_mmgn, mmgn_forward
from .training import ModelSpec, TrainConfig, train_joint

__all__ = [
    "ExperimentSpec", "Graph", "GridField", "InferConfig", "LatentTable", "MmgnDims", "MmgnModel",
    "ModelSpec", "ObservationSet", "TrainConfig", "backward", "compute_metrics", "evaluate_field",
    "generate_synthetic", "gradient_check", "infer_latent", "init_baseline", "init_mmgn",
    "interpolate_latent", "mmgn_forward", "promotion", "reconstruct", "run_experiment",
    "sample_task", "train_joint",
]
