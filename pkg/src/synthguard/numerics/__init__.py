"""Reverse-mode autodiff, layers, optimizers and clipping."""

from synthguard.numerics.autograd import Tensor, backward, grad, no_grad
from synthguard.numerics.clip import clip_by_global_norm, clip_weights_elementwise, global_norm
from synthguard.numerics.layers import MLP, Dense, LSTMCell, LSTMParams, Module, lstm_step
from synthguard.numerics.optim import SGD, Adam, OptimizerState, adam_step

__all__ = [
    "Tensor",
    "backward",
    "grad",
    "no_grad",
    "clip_by_global_norm",
    "clip_weights_elementwise",
    "global_norm",
    "MLP",
    "Dense",
    "LSTMCell",
    "LSTMParams",
    "Module",
    "lstm_step",
    "SGD",
    "Adam",
    "OptimizerState",
    "adam_step",
]
