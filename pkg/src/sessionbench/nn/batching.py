"""Padded batches and length-bucketed batch order."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import InputError


@dataclass
class PaddedBatch:
    """Token-index matrix with a reserved PAD index beyond each true length."""

    tokens: np.ndarray  # (B, T) int64
    lengths: np.ndarray  # (B,) int64
    pad_id: int

    @property
    def mask(self) -> np.ndarray:
        """(B, T) {0,1} matrix with exactly length_i leading ones per row."""
        T = self.tokens.shape[1]
        return (np.arange(T)[None, :] < self.lengths[:, None]).astype(float)

    def __len__(self) -> int:
        return self.tokens.shape[0]


def pad_sequences(sequences: Sequence[Sequence[int]], pad_id: int) -> PaddedBatch:
    if not sequences:
        raise InputError("cannot build an empty batch")
    lengths = np.array([len(s) for s in sequences], dtype=np.int64)
    if (lengths == 0).any():
        raise InputError("cannot batch an empty sequence")
    T = int(lengths.max())
    tokens = np.full((len(sequences), T), pad_id, dtype=np.int64)
    for i, seq in enumerate(sequences):
        tokens[i, : len(seq)] = seq
    return PaddedBatch(tokens, lengths, pad_id)


def bucketed_batch_order(
    lengths: Sequence[int], batch_size: int, rng: np.random.Generator
) -> list[np.ndarray]:
    """Length-sorted batches in shuffled order.

    Sorting by length keeps padding small; shuffling the batch order (not
    the contents) keeps epochs seed-deterministic.
    """
    order = np.argsort(np.asarray(lengths), kind="stable")
    batches = [order[i : i + batch_size] for i in range(0, len(order), batch_size)]
    perm = rng.permutation(len(batches))
    return [batches[p] for p in perm]
