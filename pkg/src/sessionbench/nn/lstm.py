"""Single-layer LSTM forward/backward on padded batches.

The time loop runs in the selected kernel backend; this module validates
shapes, checks finiteness, and exposes the cache needed for the backward
pass. States are kept time-major (T, B, H) internally; the public forward
returns batch-major hidden states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..errors import NumericError, ShapeError
from .batching import PaddedBatch
from .params import LstmParams


@dataclass
class LstmCache:
    tokens: np.ndarray
    lengths: np.ndarray
    h: np.ndarray  # (T, B, H) post-mask hidden states
    c: np.ndarray
    ig: np.ndarray
    fg: np.ndarray
    og: np.ndarray
    gg: np.ndarray
    tc: np.ndarray

    @property
    def hidden(self) -> np.ndarray:
        """(B, T, H) view of the hidden states."""
        return self.h.transpose(1, 0, 2)

    def final_states(self) -> tuple[np.ndarray, np.ndarray]:
        """Hidden and cell state at each sequence's last real step."""
        last = self.lengths - 1
        cols = np.arange(self.h.shape[1])
        return self.h[last, cols], self.c[last, cols]


def forward(params: LstmParams, batch: PaddedBatch) -> LstmCache:
    tokens = np.asarray(batch.tokens, dtype=np.int64)
    lengths = np.asarray(batch.lengths, dtype=np.int64)
    if tokens.ndim != 2 or lengths.shape != (tokens.shape[0],):
        raise ShapeError(f"bad batch shapes: tokens {tokens.shape}, lengths {lengths.shape}")
    real = tokens[np.arange(tokens.shape[1])[None, :] < lengths[:, None]]
    if real.size and (real.min() < 0 or real.max() >= params.input_dim):
        raise ShapeError(
            f"token ids must lie in [0, {params.input_dim}) at unmasked positions"
        )
    h, c, ig, fg, og, gg, tc = _kernels.lstm_forward(
        np.ascontiguousarray(tokens),
        np.ascontiguousarray(lengths),
        np.ascontiguousarray(params.wx),
        np.ascontiguousarray(params.wh),
        np.ascontiguousarray(params.bias),
    )
    if not np.isfinite(h[-1]).all():
        raise NumericError("non-finite hidden state in LSTM forward pass")
    return LstmCache(tokens, lengths, h, c, ig, fg, og, gg, tc)


def backward(params: LstmParams, cache: LstmCache, d_hidden: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss given d loss / d hidden (B, T, H)."""
    T, B, H = cache.h.shape
    if d_hidden.shape != (B, T, H):
        raise ShapeError(f"d_hidden must be ({B}, {T}, {H}), got {d_hidden.shape}")
    d_wx, d_wh, d_bias = _kernels.lstm_backward(
        cache.tokens,
        cache.lengths,
        params.input_dim,
        np.ascontiguousarray(params.wh),
        cache.h,
        cache.c,
        cache.ig,
        cache.fg,
        cache.og,
        cache.gg,
        cache.tc,
        np.ascontiguousarray(d_hidden.transpose(1, 0, 2)),
    )
    if not (np.isfinite(d_wx).all() and np.isfinite(d_wh).all() and np.isfinite(d_bias).all()):
        raise NumericError("non-finite gradient in LSTM backward pass")
    return {"wx": d_wx, "wh": d_wh, "bias": d_bias}
