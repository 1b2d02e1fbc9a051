"""Central-difference gradient checking for loss closures."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

LossAndGrads = Callable[[dict[str, np.ndarray]], tuple[float, dict[str, np.ndarray]]]


@dataclass
class GradCheckReport:
    max_rel_error: float
    checked: int
    worst_param: str
    worst_index: int


def grad_check(
    loss_and_grads: LossAndGrads,
    params: dict[str, np.ndarray],
    step: float = 1e-5,
    sample: int = 200,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare analytic gradients to central differences.

    Samples at least `sample` coordinates across all parameters (all of
    them if fewer exist) and reports the worst relative error
    |a - n| / max(|a| + |n|, 1e-8).
    """
    rng = rng or np.random.default_rng(0)
    _, analytic = loss_and_grads(params)
    coords: list[tuple[str, int]] = []
    for name, p in params.items():
        coords.extend((name, i) for i in range(p.size))
    if len(coords) > sample:
        picked = rng.choice(len(coords), size=sample, replace=False)
        coords = [coords[i] for i in picked]
    worst = 0.0
    worst_param = ""
    worst_index = -1
    for name, flat_idx in coords:
        p = params[name]
        original = p.flat[flat_idx]
        p.flat[flat_idx] = original + step
        up, _ = loss_and_grads(params)
        p.flat[flat_idx] = original - step
        down, _ = loss_and_grads(params)
        p.flat[flat_idx] = original
        numeric = (up - down) / (2.0 * step)
        a = float(analytic[name].flat[flat_idx])
        rel = abs(a - numeric) / max(abs(a) + abs(numeric), 1e-8)
        if rel > worst:
            worst = rel
            worst_param = name
            worst_index = flat_idx
    return GradCheckReport(worst, len(coords), worst_param, worst_index)
