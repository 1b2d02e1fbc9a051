"""Early stopping with patience and best-snapshot restore."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass
class EarlyStopper:
    """Stop after `patience` epochs without strict metric improvement.

    Epochs are 1-indexed. update() returns True when training should stop
    (patience exhausted or max_epochs reached); the best snapshot is kept
    for restoring.
    """

    patience: int = 10
    max_epochs: int = 50
    best_metric: float = float("-inf")
    best_epoch: int = 0
    best_snapshot: Any = None
    stopped_epoch: int = 0
    history: list[float] = field(default_factory=list)

    def update(self, epoch: int, metric: float, snapshot: Any) -> bool:
        self.history.append(metric)
        if metric > self.best_metric:
            self.best_metric = metric
            self.best_epoch = epoch
            self.best_snapshot = snapshot
        if epoch - self.best_epoch >= self.patience or epoch >= self.max_epochs:
            self.stopped_epoch = epoch
            return True
        return False
