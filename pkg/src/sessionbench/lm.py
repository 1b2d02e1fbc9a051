"""Per-class LSTM next-token language models driving the mixture decision.

Each class gets its own LSTM trained to predict the next symbol of
SOS-prefixed, EOS-suffixed sessions under softmax cross entropy. Sequence
scores are proper (sub-normalized) log probabilities including the EOS
factor, which both class models share symmetrically, so the decision rule
is the same as the Markov mixture's with sequence_log_prob substituted.

Input units cover the five symbols plus SOS; output units cover the five
symbols plus EOS.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import nn
from .errors import FitError, InputError, ParseError
from .mixture import decide, log_priors_from_counts, uniform_log_priors
from .sessions import LABEL_BUY, LABEL_NOBUY, SYMBOL_TO_ID, Dataset

N_SYMBOLS = len(SYMBOL_TO_ID)
SOS_ID = N_SYMBOLS  # input-side start token
EOS_ID = N_SYMBOLS  # output-side end class
PAD_ID = N_SYMBOLS + 1
INPUT_DIM = N_SYMBOLS + 1  # symbols + SOS
OUTPUT_DIM = N_SYMBOLS + 1  # symbols + EOS

HIDDEN_GRID = (10, 20, 40, 80)
LR_GRID = (0.01, 0.001)
BATCH_GRID = (10, 20, 50)


def encode_symbols(symbols: Sequence[str]) -> list[int]:
    try:
        return [SYMBOL_TO_ID[s] for s in symbols]
    except KeyError as exc:
        raise InputError(f"symbol {exc.args[0]!r} outside the session alphabet") from exc


@dataclass
class LmModel:
    lstm: nn.LstmParams
    proj: nn.DenseParams  # (OUTPUT_DIM, H)

    @property
    def hidden_dim(self) -> int:
        return self.lstm.hidden_dim

    def params(self) -> dict[str, np.ndarray]:
        return {**self.lstm.as_dict("lstm"), **self.proj.as_dict("proj")}

    def set_params(self, params: dict[str, np.ndarray]) -> None:
        self.lstm = nn.LstmParams(params["lstm.wx"], params["lstm.wh"], params["lstm.bias"])
        self.proj = nn.DenseParams(params["proj.w"], params["proj.b"])


def init_lm(hidden: int, rng: np.random.Generator) -> LmModel:
    return LmModel(nn.init_lstm(INPUT_DIM, hidden, rng), nn.init_dense(OUTPUT_DIM, hidden, rng))


def _lm_arrays(sequences: Sequence[Sequence[int]]) -> tuple[nn.PaddedBatch, np.ndarray]:
    """SOS-prefixed inputs and EOS-suffixed targets, padded together."""
    inputs = [[SOS_ID] + list(ids) for ids in sequences]
    batch = nn.pad_sequences(inputs, PAD_ID)
    targets = np.zeros_like(batch.tokens)
    for i, ids in enumerate(sequences):
        targets[i, : len(ids)] = ids
        targets[i, len(ids)] = EOS_ID
    return batch, targets


def loss_and_grads(
    model: LmModel, batch: nn.PaddedBatch, targets: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean per-token cross entropy over unmasked positions, with gradients."""
    cache = nn.forward(model.lstm, batch)
    T, B, H = cache.h.shape
    flat_h = cache.h.reshape(T * B, H)
    logits = flat_h @ model.proj.w.T + model.proj.b
    step_mask = np.arange(T)[:, None] < batch.lengths[None, :]  # (T, B)
    flat_mask = step_mask.reshape(T * B)
    flat_targets = np.ascontiguousarray(targets.T).reshape(T * B)
    losses, d_logits_masked = nn.softmax_cross_entropy_rows(
        logits[flat_mask], flat_targets[flat_mask]
    )
    n_tokens = int(flat_mask.sum())
    loss = float(losses.sum() / n_tokens)
    d_logits = np.zeros_like(logits)
    d_logits[flat_mask] = d_logits_masked / n_tokens
    d_proj_w = d_logits.T @ flat_h
    d_proj_b = d_logits.sum(axis=0)
    d_hidden = (d_logits @ model.proj.w).reshape(T, B, H).transpose(1, 0, 2)
    lstm_grads = nn.backward(model.lstm, cache, d_hidden)
    return loss, {
        "lstm.wx": lstm_grads["wx"],
        "lstm.wh": lstm_grads["wh"],
        "lstm.bias": lstm_grads["bias"],
        "proj.w": d_proj_w,
        "proj.b": d_proj_b,
    }


def _step_log_probs(model: LmModel, sequences: Sequence[Sequence[int]]) -> np.ndarray:
    """(B, T, OUTPUT_DIM) log softmax per step for SOS-prefixed inputs."""
    batch, _ = _lm_arrays(sequences)
    cache = nn.forward(model.lstm, batch)
    T, B, H = cache.h.shape
    logits = cache.h.reshape(T * B, H) @ model.proj.w.T + model.proj.b
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return log_probs.reshape(T, B, OUTPUT_DIM).transpose(1, 0, 2)


def sequence_log_probs(
    model: LmModel,
    sequences: Sequence[Sequence[str]],
    include_eos: bool = True,
    chunk: int = 256,
) -> np.ndarray:
    """Log probability of each symbol sequence under the language model.

    With include_eos the terminal factor is added and the scores form a
    sub-normalized distribution over finite strings; without it they are
    prefix probabilities, strictly decreasing in sequence length.
    """
    if any(len(s) == 0 for s in sequences):
        raise InputError("cannot score an empty sequence")
    encoded = [encode_symbols(s) for s in sequences]
    out = np.empty(len(encoded))
    for start in range(0, len(encoded), chunk):
        part = encoded[start : start + chunk]
        log_probs = _step_log_probs(model, part)
        for i, ids in enumerate(part):
            n = len(ids)
            steps = log_probs[i, np.arange(n), ids].sum()
            if include_eos:
                steps += log_probs[i, n, EOS_ID]
            out[start + i] = steps
    return out


def sequence_log_prob(model: LmModel, symbols: Sequence[str], include_eos: bool = True) -> float:
    return float(sequence_log_probs(model, [symbols], include_eos)[0])


def token_accuracy(model: LmModel, sequences: Sequence[Sequence[int]], chunk: int = 512) -> float:
    """Fraction of next-token argmax hits (EOS included) over a corpus."""
    if not sequences:
        raise InputError("cannot compute token accuracy on an empty corpus")
    hits = 0
    total = 0
    for start in range(0, len(sequences), chunk):
        part = sequences[start : start + chunk]
        batch, targets = _lm_arrays(part)
        cache = nn.forward(model.lstm, batch)
        T, B, H = cache.h.shape
        logits = cache.h.reshape(T * B, H) @ model.proj.w.T + model.proj.b
        pred = logits.argmax(axis=1).reshape(T, B).T  # (B, T)
        mask = batch.mask.astype(bool)
        hits += int((pred[mask] == targets[mask]).sum())
        total += int(mask.sum())
    return hits / total


@dataclass
class LmMixture:
    lm_buy: LmModel
    lm_nobuy: LmModel
    log_prior_buy: float
    log_prior_nobuy: float

    def classify(self, symbols: Sequence[str]) -> str:
        return classify_lm(self, symbols)

    def classify_many(self, sessions: Sequence[Sequence[str]]) -> list[str]:
        score_buy = self.log_prior_buy + sequence_log_probs(self.lm_buy, sessions)
        score_nobuy = self.log_prior_nobuy + sequence_log_probs(self.lm_nobuy, sessions)
        return [decide(b, n) for b, n in zip(score_buy, score_nobuy)]


def classify_lm(mix: LmMixture, symbols: Sequence[str]) -> str:
    return decide(
        mix.log_prior_buy + sequence_log_prob(mix.lm_buy, symbols),
        mix.log_prior_nobuy + sequence_log_prob(mix.lm_nobuy, symbols),
    )


def mixture_accuracy(mix: LmMixture, data: Dataset) -> float:
    if len(data) == 0:
        raise InputError("cannot evaluate on an empty dataset")
    predicted = mix.classify_many([s.symbols for s in data])
    return sum(p == s.label for p, s in zip(predicted, data)) / len(data)


class _LmTrainer:
    """One class-conditional LM plus its optimizer and training corpus."""

    def __init__(self, sequences, hidden, lr, batch_size, seed):
        if not sequences:
            raise FitError("cannot fit a language model on an empty corpus")
        self.sequences = [encode_symbols(s) for s in sequences]
        self.lengths = [len(s) + 1 for s in self.sequences]  # +1 for the SOS shift
        self.batch_size = batch_size
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.model = init_lm(hidden, rng)
        self.adam = nn.AdamState(learning_rate=lr)

    def run_epoch(self, epoch: int) -> float:
        order_rng = np.random.default_rng((self.seed, epoch))
        total = 0.0
        n_batches = 0
        params = self.model.params()
        for idx in nn.bucketed_batch_order(self.lengths, self.batch_size, order_rng):
            part = [self.sequences[i] for i in idx]
            batch, targets = _lm_arrays(part)
            loss, grads = loss_and_grads(self.model, batch, targets)
            self.adam.step(params, grads)
            total += loss
            n_batches += 1
        return total / n_batches

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.model.params().items()}

    def restore(self, snapshot: dict[str, np.ndarray]) -> None:
        self.model.set_params({k: v.copy() for k, v in snapshot.items()})


def fit_lm(
    sequences: Sequence[Sequence[str]],
    val_sequences: Sequence[Sequence[str]],
    hidden: int = 20,
    lr: float = 0.01,
    batch_size: int = 20,
    seed: int = 0,
    patience: int = 10,
    max_epochs: int = 50,
    val_metric_fn: Callable[[LmModel], float] | None = None,
) -> tuple[LmModel, list[dict]]:
    """Train one class-conditional LM with early stopping.

    The default validation metric is next-token accuracy on the held-out
    sequences of the same class; a custom metric closure may be injected.
    Returns the best-snapshot model and the per-epoch training curve.
    """
    trainer = _LmTrainer(sequences, hidden, lr, batch_size, seed)
    if val_metric_fn is None:
        if not val_sequences:
            raise FitError("token-level early stopping needs validation sequences")
        val_ids = [encode_symbols(s) for s in val_sequences]
        val_metric_fn = lambda model: token_accuracy(model, val_ids)  # noqa: E731
    stopper = nn.EarlyStopper(patience=patience, max_epochs=max_epochs)
    curve: list[dict] = []
    for epoch in range(1, max_epochs + 1):
        train_loss = trainer.run_epoch(epoch)
        metric = val_metric_fn(trainer.model)
        stop = stopper.update(epoch, metric, trainer.snapshot())
        curve.append(
            {
                "epoch": epoch,
                "train_loss": train_loss,
                "val_metric": metric,
                "best_so_far": stopper.best_metric,
            }
        )
        if stop:
            break
    trainer.restore(stopper.best_snapshot)
    return trainer.model, curve


def fit_lm_mixture(
    train: Dataset,
    val: Dataset,
    hidden: int = 20,
    lr: float = 0.01,
    batch_size: int = 20,
    seed: int = 0,
    patience: int = 10,
    max_epochs: int = 50,
    val_metric: str = "token",
    priors: str = "empirical",
) -> tuple[LmMixture, dict[str, list[dict]]]:
    """Train the two class LMs and assemble the mixture.

    val_metric "token" stops each LM on its own next-token accuracy;
    "session" trains both jointly and stops on mixture classification
    accuracy over the validation split.
    """
    train_buy = [s.symbols for s in train.by_label(LABEL_BUY)]
    train_nobuy = [s.symbols for s in train.by_label(LABEL_NOBUY)]
    if not train_buy or not train_nobuy:
        raise FitError("training set must contain both classes")
    if priors == "empirical":
        lp_buy, lp_nobuy = log_priors_from_counts(len(train_buy), len(train_nobuy))
    elif priors == "uniform":
        lp_buy, lp_nobuy = uniform_log_priors()
    else:
        raise InputError(f"unknown priors mode {priors!r}")
    seed_buy = int(np.random.default_rng((seed, 0)).integers(2**31))
    seed_nobuy = int(np.random.default_rng((seed, 1)).integers(2**31))

    if val_metric == "token":
        val_buy = [s.symbols for s in val.by_label(LABEL_BUY)]
        val_nobuy = [s.symbols for s in val.by_label(LABEL_NOBUY)]
        lm_buy, curve_buy = fit_lm(
            train_buy, val_buy, hidden, lr, batch_size, seed_buy, patience, max_epochs
        )
        lm_nobuy, curve_nobuy = fit_lm(
            train_nobuy, val_nobuy, hidden, lr, batch_size, seed_nobuy, patience, max_epochs
        )
        mixture = LmMixture(lm_buy, lm_nobuy, lp_buy, lp_nobuy)
        return mixture, {"buy": curve_buy, "nobuy": curve_nobuy}

    if val_metric != "session":
        raise InputError(f"unknown val_metric {val_metric!r}")
    trainer_buy = _LmTrainer(train_buy, hidden, lr, batch_size, seed_buy)
    trainer_nobuy = _LmTrainer(train_nobuy, hidden, lr, batch_size, seed_nobuy)
    mixture = LmMixture(trainer_buy.model, trainer_nobuy.model, lp_buy, lp_nobuy)
    stopper = nn.EarlyStopper(patience=patience, max_epochs=max_epochs)
    curve: list[dict] = []
    for epoch in range(1, max_epochs + 1):
        loss_buy = trainer_buy.run_epoch(epoch)
        loss_nobuy = trainer_nobuy.run_epoch(epoch)
        metric = mixture_accuracy(mixture, val)
        stop = stopper.update(
            epoch, metric, (trainer_buy.snapshot(), trainer_nobuy.snapshot())
        )
        curve.append(
            {
                "epoch": epoch,
                "train_loss": (loss_buy + loss_nobuy) / 2.0,
                "val_metric": metric,
                "best_so_far": stopper.best_metric,
            }
        )
        if stop:
            break
    snap_buy, snap_nobuy = stopper.best_snapshot
    trainer_buy.restore(snap_buy)
    trainer_nobuy.restore(snap_nobuy)
    return mixture, {"mixture": curve}


# ---------------------------------------------------------------------------
# Checkpointing


def save_mixture(mix: LmMixture, path) -> None:
    tensors: dict[str, np.ndarray] = {}
    for prefix, model in (("buy", mix.lm_buy), ("nobuy", mix.lm_nobuy)):
        for name, arr in model.params().items():
            tensors[f"{prefix}.{name}"] = arr
    meta = {
        "kind": "lm",
        "log_prior_buy": mix.log_prior_buy.hex(),
        "log_prior_nobuy": mix.log_prior_nobuy.hex(),
    }
    nn.save_tensors(path, meta, tensors)


def load_mixture(path) -> LmMixture:
    meta, tensors = nn.load_tensors(path)
    if meta.get("kind") != "lm":
        raise ParseError(1, f"expected an lm checkpoint, got kind {meta.get('kind')!r}")

    def build(prefix: str) -> LmModel:
        return LmModel(
            nn.LstmParams(
                tensors[f"{prefix}.lstm.wx"],
                tensors[f"{prefix}.lstm.wh"],
                tensors[f"{prefix}.lstm.bias"],
            ),
            nn.DenseParams(tensors[f"{prefix}.proj.w"], tensors[f"{prefix}.proj.b"]),
        )

    return LmMixture(
        build("buy"),
        build("nobuy"),
        float.fromhex(meta["log_prior_buy"]),
        float.fromhex(meta["log_prior_nobuy"]),
    )
