"""Minimal self-contained neural toolkit shared by both LSTM models."""

from .adam import AdamState, adam_update
from .batching import PaddedBatch, bucketed_batch_order, pad_sequences
from .checkpoint import load_tensors, save_tensors
from .earlystop import EarlyStopper
from .gradcheck import GradCheckReport, grad_check
from .lstm import LstmCache, backward, forward
from .ops import (
    one_hot,
    sigmoid,
    sigmoid_bce,
    sigmoid_bce_rows,
    softmax,
    softmax_cross_entropy,
    softmax_cross_entropy_rows,
)
from .params import DenseParams, LstmParams, init_dense, init_lstm

__all__ = [
    "AdamState",
    "adam_update",
    "PaddedBatch",
    "bucketed_batch_order",
    "pad_sequences",
    "load_tensors",
    "save_tensors",
    "EarlyStopper",
    "GradCheckReport",
    "grad_check",
    "LstmCache",
    "backward",
    "forward",
    "one_hot",
    "sigmoid",
    "sigmoid_bce",
    "sigmoid_bce_rows",
    "softmax",
    "softmax_cross_entropy",
    "softmax_cross_entropy_rows",
    "DenseParams",
    "LstmParams",
    "init_dense",
    "init_lstm",
]
