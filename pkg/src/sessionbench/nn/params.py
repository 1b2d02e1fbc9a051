"""Parameter containers and seeded initialization for the LSTM models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError


@dataclass
class LstmParams:
    """Fused single-layer LSTM weights.

    wx is (4H, D), wh is (4H, H), bias is (4H,), with the gate blocks laid
    out [input, forget, output, candidate]. Per-gate views of the
    conventional (H, D+H) matrices are exposed for inspection.
    """

    wx: np.ndarray
    wh: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        h4, d = self.wx.shape
        if h4 % 4 != 0 or self.wh.shape != (h4, h4 // 4) or self.bias.shape != (h4,):
            raise ShapeError(
                f"inconsistent LSTM shapes: wx {self.wx.shape}, wh {self.wh.shape}, "
                f"bias {self.bias.shape}"
            )

    @property
    def input_dim(self) -> int:
        return self.wx.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.wx.shape[0] // 4

    def gate(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """(weights (H, D+H), bias (H,)) for one of input/forget/output/candidate."""
        idx = ("input", "forget", "output", "candidate").index(name)
        h = self.hidden_dim
        sl = slice(idx * h, (idx + 1) * h)
        return np.hstack([self.wx[sl], self.wh[sl]]), self.bias[sl]

    def as_dict(self, prefix: str = "lstm") -> dict[str, np.ndarray]:
        return {f"{prefix}.wx": self.wx, f"{prefix}.wh": self.wh, f"{prefix}.bias": self.bias}


@dataclass
class DenseParams:
    w: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)

    def __post_init__(self):
        if self.w.ndim != 2 or self.b.shape != (self.w.shape[0],):
            raise ShapeError(f"inconsistent dense shapes: w {self.w.shape}, b {self.b.shape}")

    def as_dict(self, prefix: str = "dense") -> dict[str, np.ndarray]:
        return {f"{prefix}.w": self.w, f"{prefix}.b": self.b}


def init_lstm(input_dim: int, hidden_dim: int, rng: np.random.Generator) -> LstmParams:
    """Uniform [-1/sqrt(H), 1/sqrt(H)] init; forget-gate bias starts at 1."""
    bound = 1.0 / np.sqrt(hidden_dim)
    wx = rng.uniform(-bound, bound, size=(4 * hidden_dim, input_dim))
    wh = rng.uniform(-bound, bound, size=(4 * hidden_dim, hidden_dim))
    bias = np.zeros(4 * hidden_dim)
    bias[hidden_dim : 2 * hidden_dim] = 1.0
    return LstmParams(wx, wh, bias)


def init_dense(out_dim: int, in_dim: int, rng: np.random.Generator) -> DenseParams:
    bound = 1.0 / np.sqrt(in_dim)
    return DenseParams(rng.uniform(-bound, bound, size=(out_dim, in_dim)), np.zeros(out_dim))
