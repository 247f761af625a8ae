"""Autoregressive graph diffusion: learned-order node-absorbing generative
models for small graphs, with training, sampling, likelihood estimation and
distribution evaluation."""

from .denoiser import DenoiserConfig, DenoiserNet, StepPrediction
from .generate import GenerationConfig, GenerationTrace, generate, generate_batch
from .graphs import (ABSENT, MASK, DenoisingView, DiffusionTrajectory,
                     LabeledGraph, MaskedGraph, absorb_node, apply_prediction,
                     denoising_view, edge_state, forward_trajectory, new_graph,
                     permute)
from .model import ModelBundle
from .ordering import OrderingConfig, OrderingNet, positional_encoding
from .training import TrainConfig, TrainReport, fit

__version__ = "0.1.0"

__all__ = [
    "ABSENT", "MASK",
    "LabeledGraph", "MaskedGraph", "DenoisingView", "DiffusionTrajectory",
    "new_graph", "absorb_node", "edge_state", "denoising_view",
    "apply_prediction", "permute", "forward_trajectory",
    "OrderingConfig", "OrderingNet", "positional_encoding",
    "DenoiserConfig", "DenoiserNet", "StepPrediction",
    "ModelBundle", "TrainConfig", "TrainReport", "fit",
    "GenerationConfig", "GenerationTrace", "generate", "generate_batch",
]
