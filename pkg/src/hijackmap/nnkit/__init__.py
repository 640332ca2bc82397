"""Minimal dense-tensor neural network kit.

Float64 throughout; single-threaded, seeded, and fully deterministic.
"""

from hijackmap.nnkit.ops import (
    conv1d_forward,
    dense_forward,
    maxpool1d_forward,
    multi_head_attention,
    relu,
    scaled_dot_attention,
    scaled_dot_attention_backward,
    sigmoid,
    softmax,
)
from hijackmap.nnkit.losses import bce_loss, bce_loss_grad, mse_loss, mse_loss_grad
from hijackmap.nnkit.optim import AdamState, adam_step
from hijackmap.nnkit.train import EpochTrace, TrainConfig, TrainingDiverged, evaluate, train
from hijackmap.nnkit.gradcheck import GradCheckReport, gradient_check
from hijackmap.nnkit.checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "AdamState",
    "EpochTrace",
    "GradCheckReport",
    "TrainConfig",
    "TrainingDiverged",
    "adam_step",
    "bce_loss",
    "bce_loss_grad",
    "conv1d_forward",
    "dense_forward",
    "evaluate",
    "gradient_check",
    "load_checkpoint",
    "maxpool1d_forward",
    "mse_loss",
    "mse_loss_grad",
    "multi_head_attention",
    "relu",
    "save_checkpoint",
    "scaled_dot_attention",
    "scaled_dot_attention_backward",
    "sigmoid",
    "softmax",
    "train",
]
