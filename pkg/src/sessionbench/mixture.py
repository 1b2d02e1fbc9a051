"""Shared decision rule for generative mixture classifiers.

Both the Markov mixture and the language-model mixture score a session
with one per-class sequence model and pick the class with the higher
prior-weighted log score. Ties go to NOBUY, the majority class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import FitError
from .sessions import LABEL_BUY, LABEL_NOBUY


def decide(score_buy: float, score_nobuy: float) -> str:
    """BUY iff the BUY score strictly exceeds the NOBUY score."""
    return LABEL_BUY if score_buy > score_nobuy else LABEL_NOBUY


def log_priors_from_counts(n_buy: int, n_nobuy: int) -> tuple[float, float]:
    total = n_buy + n_nobuy
    if n_buy <= 0 or n_nobuy <= 0:
        raise FitError("both classes must be present to estimate priors")
    return math.log(n_buy / total), math.log(n_nobuy / total)


def uniform_log_priors() -> tuple[float, float]:
    return math.log(0.5), math.log(0.5)


@dataclass
class ScoreMixture:
    """Generic two-class mixture over arbitrary sequence scorers."""

    score_buy: Callable[[Sequence[str]], float]
    score_nobuy: Callable[[Sequence[str]], float]
    log_prior_buy: float
    log_prior_nobuy: float

    def classify(self, symbols: Sequence[str]) -> str:
        return decide(
            self.log_prior_buy + self.score_buy(symbols),
            self.log_prior_nobuy + self.score_nobuy(symbols),
        )
