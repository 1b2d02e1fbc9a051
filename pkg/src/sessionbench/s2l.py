"""Discriminative sequence-to-label classifier.

One LSTM layer over the raw symbol sequence, pooled to a single vector
(last unmasked state or padding-aware mean), a (hidden x 1) dense head,
sigmoid output, trained with binary cross entropy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import nn
from .errors import FitError, InputError, ParseError
from .sessions import LABEL_BUY, LABEL_NOBUY, SYMBOL_TO_ID, Dataset

N_SYMBOLS = len(SYMBOL_TO_ID)
PAD_ID = N_SYMBOLS
INPUT_DIM = N_SYMBOLS

POOL_LAST = "last"
POOL_AVG = "avg"


def encode_symbols(symbols: Sequence[str]) -> list[int]:
    try:
        return [SYMBOL_TO_ID[s] for s in symbols]
    except KeyError as exc:
        raise InputError(f"symbol {exc.args[0]!r} outside the session alphabet") from exc


@dataclass
class S2lModel:
    lstm: nn.LstmParams
    head: nn.DenseParams  # (1, H)
    pooling: str
    threshold: float = 0.5

    def __post_init__(self):
        if self.pooling not in (POOL_LAST, POOL_AVG):
            raise InputError(f"pooling must be '{POOL_LAST}' or '{POOL_AVG}'")
        if self.head.w.shape[0] != 1:
            raise InputError("the head must map hidden states to a single logit")

    @property
    def hidden_dim(self) -> int:
        return self.lstm.hidden_dim

    def params(self) -> dict[str, np.ndarray]:
        return {**self.lstm.as_dict("lstm"), **self.head.as_dict("head")}

    def set_params(self, params: dict[str, np.ndarray]) -> None:
        self.lstm = nn.LstmParams(params["lstm.wx"], params["lstm.wh"], params["lstm.bias"])
        self.head = nn.DenseParams(params["head.w"], params["head.b"])

    def classify(self, symbols: Sequence[str]) -> str:
        return classify_s2l(self, symbols)


def init_s2l(hidden: int, pooling: str, rng: np.random.Generator) -> S2lModel:
    return S2lModel(nn.init_lstm(INPUT_DIM, hidden, rng), nn.init_dense(1, hidden, rng), pooling)


def pool(hidden_states: np.ndarray, mask: np.ndarray, pooling: str) -> np.ndarray:
    """Reduce one sequence's (len, H) states to a single (H,) vector.

    last: the state at the final unmasked position; avg: the mean over
    unmasked positions only.
    """
    mask = np.asarray(mask, dtype=bool)
    if hidden_states.ndim != 2 or mask.shape != (hidden_states.shape[0],):
        raise InputError("pool expects (len, H) states and a (len,) mask")
    if not mask.any():
        raise InputError("cannot pool a fully masked sequence")
    if pooling == POOL_LAST:
        return hidden_states[np.nonzero(mask)[0][-1]]
    if pooling == POOL_AVG:
        return hidden_states[mask].mean(axis=0)
    raise InputError(f"unknown pooling {pooling!r}")


def _pool_batch(cache: nn.LstmCache, pooling: str) -> np.ndarray:
    """(B, H) pooled vectors from a forward cache."""
    lengths = cache.lengths
    if pooling == POOL_LAST:
        return cache.h[lengths - 1, np.arange(cache.h.shape[1])]
    # avg: masked steps hold copies of the last real state, so sum over the
    # stored states cannot be used directly; accumulate real steps only.
    T, B, H = cache.h.shape
    step_mask = (np.arange(T)[:, None] < lengths[None, :])[:, :, None]  # (T, B, 1)
    total = (cache.h * step_mask).sum(axis=0)
    return total / lengths[:, None]


def _pool_backward(cache: nn.LstmCache, pooling: str, d_pooled: np.ndarray) -> np.ndarray:
    """Distribute (B, H) pooled gradients over (B, T, H) hidden states."""
    T, B, H = cache.h.shape
    d_hidden = np.zeros((B, T, H))
    if pooling == POOL_LAST:
        d_hidden[np.arange(B), cache.lengths - 1] = d_pooled
    else:
        mask = np.arange(T)[None, :] < cache.lengths[:, None]  # (B, T)
        d_hidden += mask[:, :, None] * (d_pooled / cache.lengths[:, None])[:, None, :]
    return d_hidden


def _forward_logits(model: S2lModel, batch: nn.PaddedBatch) -> tuple[np.ndarray, nn.LstmCache, np.ndarray]:
    cache = nn.forward(model.lstm, batch)
    pooled = _pool_batch(cache, model.pooling)
    logits = pooled @ model.head.w[0] + model.head.b[0]
    return logits, cache, pooled


def loss_and_grads(
    model: S2lModel, batch: nn.PaddedBatch, targets: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean sigmoid BCE over the batch, with gradients."""
    logits, cache, pooled = _forward_logits(model, batch)
    losses, d_logits = nn.sigmoid_bce_rows(logits, targets)
    B = len(batch)
    loss = float(losses.mean())
    d_logits = d_logits / B
    d_head_w = (d_logits @ pooled)[None, :]
    d_head_b = np.array([d_logits.sum()])
    d_pooled = np.outer(d_logits, model.head.w[0])
    d_hidden = _pool_backward(cache, model.pooling, d_pooled)
    lstm_grads = nn.backward(model.lstm, cache, d_hidden)
    return loss, {
        "lstm.wx": lstm_grads["wx"],
        "lstm.wh": lstm_grads["wh"],
        "lstm.bias": lstm_grads["bias"],
        "head.w": d_head_w,
        "head.b": d_head_b,
    }


def predict_probas(model: S2lModel, sessions: Sequence[Sequence[str]], chunk: int = 512) -> np.ndarray:
    """P(BUY | session) for each session."""
    if any(len(s) == 0 for s in sessions):
        raise InputError("cannot score an empty session")
    encoded = [encode_symbols(s) for s in sessions]
    out = np.empty(len(encoded))
    for start in range(0, len(encoded), chunk):
        part = encoded[start : start + chunk]
        batch = nn.pad_sequences(part, PAD_ID)
        logits, _, _ = _forward_logits(model, batch)
        out[start : start + len(part)] = nn.sigmoid(logits)
    return out


def predict_proba(model: S2lModel, symbols: Sequence[str]) -> float:
    return float(predict_probas(model, [symbols])[0])


def classify_s2l(model: S2lModel, symbols: Sequence[str]) -> str:
    return LABEL_BUY if predict_proba(model, symbols) > model.threshold else LABEL_NOBUY


def accuracy(model: S2lModel, data: Dataset) -> float:
    if len(data) == 0:
        raise InputError("cannot evaluate on an empty dataset")
    probas = predict_probas(model, [s.symbols for s in data])
    predicted = np.where(probas > model.threshold, LABEL_BUY, LABEL_NOBUY)
    return float(np.mean([p == s.label for p, s in zip(predicted, data)]))


def fit_s2l(
    train: Dataset,
    val: Dataset,
    pooling: str = POOL_LAST,
    hidden: int = 20,
    lr: float = 0.01,
    batch_size: int = 20,
    seed: int = 0,
    patience: int = 10,
    max_epochs: int = 50,
) -> tuple[S2lModel, list[dict]]:
    """Train with early stopping on validation classification accuracy."""
    sequences = [encode_symbols(s.symbols) for s in train]
    targets = np.array([1.0 if s.label == LABEL_BUY else 0.0 for s in train])
    if len(np.unique(targets)) < 2:
        raise FitError("training set must contain both classes")
    rng = np.random.default_rng(seed)
    model = init_s2l(hidden, pooling, rng)
    adam = nn.AdamState(learning_rate=lr)
    params = model.params()
    lengths = [len(s) for s in sequences]
    stopper = nn.EarlyStopper(patience=patience, max_epochs=max_epochs)
    curve: list[dict] = []
    for epoch in range(1, max_epochs + 1):
        order_rng = np.random.default_rng((seed, epoch))
        total = 0.0
        n_batches = 0
        for idx in nn.bucketed_batch_order(lengths, batch_size, order_rng):
            batch = nn.pad_sequences([sequences[i] for i in idx], PAD_ID)
            loss, grads = loss_and_grads(model, batch, targets[idx])
            adam.step(params, grads)
            total += loss
            n_batches += 1
        metric = accuracy(model, val)
        snapshot = {k: v.copy() for k, v in params.items()}
        stop = stopper.update(epoch, metric, snapshot)
        curve.append(
            {
                "epoch": epoch,
                "train_loss": total / n_batches,
                "val_metric": metric,
                "best_so_far": stopper.best_metric,
            }
        )
        if stop:
            break
    model.set_params({k: v.copy() for k, v in stopper.best_snapshot.items()})
    return model, curve


def save_model(model: S2lModel, path) -> None:
    meta = {
        "kind": "s2l",
        "pooling": model.pooling,
        "threshold": float(model.threshold).hex(),
    }
    nn.save_tensors(path, meta, model.params())


def load_model(path) -> S2lModel:
    meta, tensors = nn.load_tensors(path)
    if meta.get("kind") != "s2l":
        raise ParseError(1, f"expected an s2l checkpoint, got kind {meta.get('kind')!r}")
    return S2lModel(
        nn.LstmParams(tensors["lstm.wx"], tensors["lstm.wh"], tensors["lstm.bias"]),
        nn.DenseParams(tensors["head.w"], tensors["head.b"]),
        meta["pooling"],
        float.fromhex(meta["threshold"]),
    )
