"""Mixture-of-Markov-chains session classifier.

One order-k chain per class, estimated with add-alpha smoothing over the
five session symbols plus a start-of-sequence token. Sequences are
left-padded with k SOS tokens so every position has a full context; there
is no end token (both class models would share it, so it cancels in the
decision).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import FitError, InputError, ParseError
from .mixture import ScoreMixture, decide, log_priors_from_counts, uniform_log_priors
from .sessions import LABEL_BUY, LABEL_NOBUY, SYMBOLS, SYMBOL_TO_ID, Dataset

SOS = "<s>"
ALPHABET = SYMBOLS + (SOS,)
SOS_ID = len(SYMBOLS)
ALPHABET_SIZE = len(ALPHABET)

DEFAULT_ORDER = 5
DEFAULT_ALPHA = 1.0


def encode_symbols(symbols: Sequence[str]) -> list[int]:
    try:
        return [SYMBOL_TO_ID[s] for s in symbols]
    except KeyError as exc:
        raise InputError(f"symbol {exc.args[0]!r} outside the session alphabet") from exc


@dataclass
class MarkovModel:
    """Order-k transition counts with add-alpha smoothing.

    The alphabet defaults to the five session symbols plus SOS; the size
    is a field so the smoothing arithmetic can be exercised on reduced
    alphabets.
    """

    order: int
    alpha: float
    counts: dict[tuple[int, ...], np.ndarray] = field(default_factory=dict)
    alphabet_size: int = ALPHABET_SIZE

    def cond_log_prob(self, context: tuple[int, ...], token: int) -> float:
        row = self.counts.get(context)
        if row is None:
            return -math.log(self.alphabet_size)
        return math.log(
            (row[token] + self.alpha) / (row.sum() + self.alpha * self.alphabet_size)
        )

    def cond_dist(self, context: tuple[int, ...]) -> np.ndarray:
        """Smoothed next-token distribution for a context."""
        row = self.counts.get(context)
        if row is None:
            return np.full(self.alphabet_size, 1.0 / self.alphabet_size)
        return (row + self.alpha) / (row.sum() + self.alpha * self.alphabet_size)


def fit_ids(
    id_sequences: Iterable[Sequence[int]],
    order: int,
    alpha: float = DEFAULT_ALPHA,
    alphabet_size: int = ALPHABET_SIZE,
) -> MarkovModel:
    """Estimate an order-k chain from token-id sequences.

    Sequences are left-padded with `order` SOS tokens (id alphabet_size-1,
    the last alphabet slot) and every transition context -> token is
    counted.
    """
    if order < 1:
        raise InputError(f"order must be >= 1, got {order}")
    if alpha <= 0:
        raise InputError(f"alpha must be > 0, got {alpha}")
    sos = alphabet_size - 1
    model = MarkovModel(order, alpha, alphabet_size=alphabet_size)
    n_seqs = 0
    for ids in id_sequences:
        n_seqs += 1
        padded = [sos] * order + list(ids)
        for pos in range(order, len(padded)):
            context = tuple(padded[pos - order : pos])
            row = model.counts.get(context)
            if row is None:
                row = np.zeros(alphabet_size, dtype=np.int64)
                model.counts[context] = row
            row[padded[pos]] += 1
    if n_seqs == 0:
        raise FitError("cannot fit a Markov model on an empty corpus")
    return model


def fit(sequences: Iterable[Sequence[str]], order: int, alpha: float = DEFAULT_ALPHA) -> MarkovModel:
    """Estimate an order-k chain from one class's symbol sequences."""
    return fit_ids([encode_symbols(s) for s in sequences], order, alpha)


def log_likelihood_ids(model: MarkovModel, ids: Sequence[int]) -> float:
    if len(ids) == 0:
        raise InputError("cannot score an empty sequence")
    if any(t < 0 or t >= model.alphabet_size for t in ids):
        raise InputError("token id outside the model alphabet")
    sos = model.alphabet_size - 1
    padded = [sos] * model.order + list(ids)
    total = 0.0
    for pos in range(model.order, len(padded)):
        context = tuple(padded[pos - model.order : pos])
        total += model.cond_log_prob(context, padded[pos])
    return total


def log_likelihood(model: MarkovModel, symbols: Sequence[str]) -> float:
    """Sum of smoothed conditional log probabilities, SOS-padded."""
    if not symbols:
        raise InputError("cannot score an empty sequence")
    return log_likelihood_ids(model, encode_symbols(symbols))


@dataclass
class MarkovMixture:
    model_buy: MarkovModel
    model_nobuy: MarkovModel
    log_prior_buy: float
    log_prior_nobuy: float

    def classify(self, symbols: Sequence[str]) -> str:
        return classify(self, symbols)

    def as_score_mixture(self) -> ScoreMixture:
        return ScoreMixture(
            lambda s: log_likelihood(self.model_buy, s),
            lambda s: log_likelihood(self.model_nobuy, s),
            self.log_prior_buy,
            self.log_prior_nobuy,
        )


def classify(clf: MarkovMixture, symbols: Sequence[str]) -> str:
    return decide(
        clf.log_prior_buy + log_likelihood(clf.model_buy, symbols),
        clf.log_prior_nobuy + log_likelihood(clf.model_nobuy, symbols),
    )


def fit_mixture(
    train: Dataset,
    order: int = DEFAULT_ORDER,
    alpha: float = DEFAULT_ALPHA,
    priors: str = "empirical",
) -> MarkovMixture:
    buy = [s.symbols for s in train.by_label(LABEL_BUY)]
    nobuy = [s.symbols for s in train.by_label(LABEL_NOBUY)]
    if not buy or not nobuy:
        raise FitError("training set must contain both classes")
    if priors == "empirical":
        lp_buy, lp_nobuy = log_priors_from_counts(len(buy), len(nobuy))
    elif priors == "uniform":
        lp_buy, lp_nobuy = uniform_log_priors()
    else:
        raise InputError(f"unknown priors mode {priors!r}")
    return MarkovMixture(fit(buy, order, alpha), fit(nobuy, order, alpha), lp_buy, lp_nobuy)


def accuracy(clf: MarkovMixture, data: Dataset) -> float:
    if len(data) == 0:
        raise InputError("cannot evaluate on an empty dataset")
    hits = sum(1 for s in data if classify(clf, s.symbols) == s.label)
    return hits / len(data)


def select_order(
    train: Dataset,
    val: Dataset,
    orders: Sequence[int],
    alpha: float = DEFAULT_ALPHA,
    priors: str = "empirical",
) -> tuple[int, list[tuple[int, float]]]:
    """Pick the order with the best validation accuracy (ties -> smaller).

    Returns the winner along with the full order-vs-accuracy curve.
    """
    if not orders:
        raise InputError("order candidates must be non-empty")
    curve: list[tuple[int, float]] = []
    best_order = None
    best_acc = -1.0
    for order in sorted(orders):
        acc = accuracy(fit_mixture(train, order, alpha, priors), val)
        curve.append((order, acc))
        if acc > best_acc:
            best_acc = acc
            best_order = order
    assert best_order is not None
    return best_order, curve


# ---------------------------------------------------------------------------
# Plain-text serialization (exact round-trip: counts are integers, priors hex)


def save_mixture(clf: MarkovMixture, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("markov-mixture v1\n")
        fh.write(f"order {clf.model_buy.order}\n")
        fh.write(f"alpha {float(clf.model_buy.alpha).hex()}\n")
        fh.write(f"log_prior_buy {clf.log_prior_buy.hex()}\n")
        fh.write(f"log_prior_nobuy {clf.log_prior_nobuy.hex()}\n")
        for name, model in (("buy", clf.model_buy), ("nobuy", clf.model_nobuy)):
            fh.write(f"model {name} order {model.order} alpha {float(model.alpha).hex()}\n")
            for context in sorted(model.counts):
                row = " ".join(str(int(c)) for c in model.counts[context])
                ctx = " ".join(ALPHABET[t] for t in context)
                fh.write(f"ctx {ctx} | {row}\n")


def load_mixture(path) -> MarkovMixture:
    token_ids = {t: i for i, t in enumerate(ALPHABET)}
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "markov-mixture v1":
        raise ParseError(1, "not a markov-mixture checkpoint")
    header: dict[str, str] = {}
    i = 1
    while i < len(lines) and not lines[i].startswith("model "):
        key, value = lines[i].split(" ", 1)
        header[key] = value
        i += 1
    models: dict[str, MarkovModel] = {}
    current = None
    for line_no in range(i, len(lines)):
        line = lines[line_no]
        if not line:
            continue
        if line.startswith("model "):
            _, name, _, order, _, alpha = line.split(" ")
            current = MarkovModel(int(order), float.fromhex(alpha))
            models[name] = current
        elif line.startswith("ctx "):
            if current is None:
                raise ParseError(line_no + 1, "context line before any model header")
            body = line[4:]
            ctx_part, row_part = body.split(" | ")
            context = tuple(token_ids[t] for t in ctx_part.split(" "))
            row = np.array([int(c) for c in row_part.split(" ")], dtype=np.int64)
            current.counts[context] = row
        else:
            raise ParseError(line_no + 1, f"unexpected line {line!r}")
    try:
        return MarkovMixture(
            models["buy"],
            models["nobuy"],
            float.fromhex(header["log_prior_buy"]),
            float.fromhex(header["log_prior_nobuy"]),
        )
    except KeyError as exc:
        raise ParseError(1, f"missing section {exc.args[0]!r}") from exc
