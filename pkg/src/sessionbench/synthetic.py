"""Synthetic session generators with known ground truth.

Stands in for the proprietary clickstream corpus: labeled sessions are
sampled from class-conditional processes, so recoverability of the labels
can be checked against a Bayes-optimal oracle that scores with the true
generating chains.

Generation is deterministic per seed and parallel-safe: session i draws
from an independent substream keyed by (seed, i).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import parse_floats, parse_ints
from .errors import SpecError
from .sessions import LABEL_BUY, LABEL_NOBUY, SYMBOLS, Dataset, LabeledSession

N_SYMBOLS = len(SYMBOLS)

_ATOL = 1e-12


@dataclass(frozen=True)
class ChainSpec:
    """Order-1 Markov chain over the five non-buy categories."""

    init: np.ndarray  # (5,)
    trans: np.ndarray  # (5, 5), row-stochastic

    def validate(self) -> None:
        init = np.asarray(self.init, dtype=float)
        trans = np.asarray(self.trans, dtype=float)
        if init.shape != (N_SYMBOLS,) or trans.shape != (N_SYMBOLS, N_SYMBOLS):
            raise SpecError(
                f"chain shapes must be ({N_SYMBOLS},) and ({N_SYMBOLS},{N_SYMBOLS})"
            )
        if (init < 0).any() or (trans < 0).any():
            raise SpecError("chain probabilities must be non-negative")
        if abs(init.sum() - 1.0) > _ATOL:
            raise SpecError(f"initial distribution sums to {init.sum()!r}, not 1")
        rows = trans.sum(axis=1)
        if np.abs(rows - 1.0).max() > _ATOL:
            raise SpecError("every transition row must sum to 1 within 1e-12")


@dataclass(frozen=True)
class LengthDist:
    """Discrete session-length distribution supported on [10, 200]."""

    lengths: np.ndarray  # (k,) ints
    probs: np.ndarray  # (k,)

    @staticmethod
    def uniform(low: int = 10, high: int = 60) -> "LengthDist":
        lengths = np.arange(low, high + 1)
        return LengthDist(lengths, np.full(len(lengths), 1.0 / len(lengths)))

    def validate(self) -> None:
        lengths = np.asarray(self.lengths)
        probs = np.asarray(self.probs, dtype=float)
        if lengths.shape != probs.shape or lengths.ndim != 1 or len(lengths) == 0:
            raise SpecError("length distribution must be two equal-length vectors")
        if (lengths < 10).any() or (lengths > 200).any():
            raise SpecError("session lengths must lie in [10, 200]")
        if (probs < 0).any() or abs(probs.sum() - 1.0) > _ATOL:
            raise SpecError("length probabilities must be >= 0 and sum to 1")


@dataclass(frozen=True)
class GeneratorSpec:
    buy_chain: ChainSpec
    nobuy_chain: ChainSpec
    length_dist: LengthDist
    n_buy: int
    n_nobuy: int
    seed: int

    def validate(self) -> None:
        self.buy_chain.validate()
        self.nobuy_chain.validate()
        self.length_dist.validate()
        if self.n_buy < 0 or self.n_nobuy < 0:
            raise SpecError("session counts must be non-negative")


def _session_rng(seed: int, index: int) -> np.random.Generator:
    # Counter scheme: one independent substream per session index.
    return np.random.default_rng((seed, index))


def _sample_session(cum_init, cum_trans, length: int, rng: np.random.Generator):
    # Inverse-CDF sampling from precomputed cumulative rows.
    u = rng.random(length)
    ids = np.empty(length, dtype=np.int64)
    ids[0] = min(int(np.searchsorted(cum_init, u[0], side="right")), N_SYMBOLS - 1)
    for t in range(1, length):
        ids[t] = min(
            int(np.searchsorted(cum_trans[ids[t - 1]], u[t], side="right")),
            N_SYMBOLS - 1,
        )
    return tuple(SYMBOLS[i] for i in ids)


def generate_dataset(spec: GeneratorSpec) -> Dataset:
    """Sample n_buy BUY and n_nobuy NOBUY sessions from the configured chains."""
    spec.validate()
    lengths = np.asarray(spec.length_dist.lengths)
    probs = np.asarray(spec.length_dist.probs, dtype=float)
    cum = {
        LABEL_BUY: (np.cumsum(spec.buy_chain.init), np.cumsum(spec.buy_chain.trans, axis=1)),
        LABEL_NOBUY: (
            np.cumsum(spec.nobuy_chain.init),
            np.cumsum(spec.nobuy_chain.trans, axis=1),
        ),
    }
    sessions: list[LabeledSession] = []
    for i in range(spec.n_buy + spec.n_nobuy):
        rng = _session_rng(spec.seed, i)
        length = int(rng.choice(lengths, p=probs))
        label = LABEL_BUY if i < spec.n_buy else LABEL_NOBUY
        cum_init, cum_trans = cum[label]
        sessions.append(
            LabeledSession(_sample_session(cum_init, cum_trans, length, rng), label)
        )
    return Dataset(sessions, "synthetic", meta={"seed": spec.seed})


def _chain_log_likelihood(chain: ChainSpec, ids: np.ndarray) -> float:
    with np.errstate(divide="ignore"):
        log_init = np.log(np.asarray(chain.init, dtype=float))
        log_trans = np.log(np.asarray(chain.trans, dtype=float))
    total = log_init[ids[0]]
    if len(ids) > 1:
        total += log_trans[ids[:-1], ids[1:]].sum()
    return float(total)


def bayes_optimal_accuracy(spec: GeneratorSpec, data: Dataset) -> float:
    """Accuracy of the oracle that classifies with the true chains and priors.

    Sessions impossible under both chains score -inf for both classes and
    fall to the NOBUY tie rule.
    """
    n_total = spec.n_buy + spec.n_nobuy
    if n_total == 0 or len(data) == 0:
        raise SpecError("cannot score an empty dataset")
    with np.errstate(divide="ignore"):
        log_prior_buy = np.log(spec.n_buy / n_total)
        log_prior_nobuy = np.log(spec.n_nobuy / n_total)
    correct = 0
    for session in data:
        ids = np.asarray(session.symbol_ids(), dtype=np.int64)
        score_buy = log_prior_buy + _chain_log_likelihood(spec.buy_chain, ids)
        score_nobuy = log_prior_nobuy + _chain_log_likelihood(spec.nobuy_chain, ids)
        predicted = LABEL_BUY if score_buy > score_nobuy else LABEL_NOBUY
        correct += predicted == session.label
    return correct / len(data)


# ---------------------------------------------------------------------------
# Named presets


def _uniform_chain() -> ChainSpec:
    p = np.full(N_SYMBOLS, 1.0 / N_SYMBOLS)
    return ChainSpec(p.copy(), np.tile(p, (N_SYMBOLS, 1)))


def _sticky_chain(self_p: float, init) -> ChainSpec:
    off = (1.0 - self_p) / (N_SYMBOLS - 1)
    trans = np.full((N_SYMBOLS, N_SYMBOLS), off)
    np.fill_diagonal(trans, self_p)
    return ChainSpec(np.asarray(init, dtype=float), trans)


def _mid_chains() -> tuple[ChainSpec, ChainSpec]:
    """Two order-1 chains with moderate per-step divergence.

    Buyers dwell (higher self-transition rate), window shoppers flit
    between categories. The repeat-rate contrast separates the classes in
    transition structure and in tie density, while staying partial enough
    that the oracle lands mid-range rather than at 1.0.
    """
    buy = _sticky_chain(0.28, [0.30, 0.20, 0.22, 0.18, 0.10])
    nobuy = _sticky_chain(0.12, [0.38, 0.26, 0.16, 0.10, 0.10])
    return buy, nobuy


def _disjoint_chains() -> tuple[ChainSpec, ChainSpec]:
    buy_init = np.array([0.5, 0.5, 0.0, 0.0, 0.0])
    nobuy_init = np.array([0.0, 0.0, 0.5, 0.5, 0.0])
    buy_trans = np.tile(buy_init, (N_SYMBOLS, 1))
    nobuy_trans = np.tile(nobuy_init, (N_SYMBOLS, 1))
    return ChainSpec(buy_init, buy_trans), ChainSpec(nobuy_init, nobuy_trans)


def make_preset_spec(
    name: str, n_buy: int, n_nobuy: int, seed: int, length_dist: LengthDist | None = None
) -> GeneratorSpec:
    """GeneratorSpec for the chain-based presets."""
    if length_dist is None:
        length_dist = LengthDist.uniform()
    if name == "identical":
        chain = _uniform_chain()
        return GeneratorSpec(chain, chain, length_dist, n_buy, n_nobuy, seed)
    if name == "separable-mid":
        buy, nobuy = _mid_chains()
        return GeneratorSpec(buy, nobuy, length_dist, n_buy, n_nobuy, seed)
    if name == "disjoint":
        buy, nobuy = _disjoint_chains()
        return GeneratorSpec(buy, nobuy, length_dist, n_buy, n_nobuy, seed)
    raise SpecError(f"unknown chain preset {name!r}")


def _generate_longrange(
    n_buy: int, n_nobuy: int, seed: int, length_dist: LengthDist
) -> Dataset:
    """Label = [first symbol equals last symbol].

    Interior symbols are iid uniform, so no bounded-order chain can link
    the last symbol back to the first once sessions are longer than the
    chain order.
    """
    lengths = np.asarray(length_dist.lengths)
    probs = np.asarray(length_dist.probs, dtype=float)
    sessions: list[LabeledSession] = []
    for i in range(n_buy + n_nobuy):
        rng = _session_rng(seed, i)
        length = int(rng.choice(lengths, p=probs))
        ids = rng.integers(0, N_SYMBOLS, size=length)
        if i < n_buy:
            ids[-1] = ids[0]
            label = LABEL_BUY
        else:
            others = [v for v in range(N_SYMBOLS) if v != ids[0]]
            ids[-1] = others[int(rng.integers(0, len(others)))]
            label = LABEL_NOBUY
        sessions.append(LabeledSession(tuple(SYMBOLS[v] for v in ids), label))
    return Dataset(sessions, "synthetic", meta={"seed": seed, "preset": "longrange"})


def _generate_order2(
    n_buy: int, n_nobuy: int, seed: int, length_dist: LengthDist
) -> Dataset:
    """Order-2 dynamics: BUY repeats the symbol two steps back, NOBUY avoids it."""
    lengths = np.asarray(length_dist.lengths)
    probs = np.asarray(length_dist.probs, dtype=float)
    stick = 0.7
    sessions: list[LabeledSession] = []
    for i in range(n_buy + n_nobuy):
        rng = _session_rng(seed, i)
        length = int(rng.choice(lengths, p=probs))
        ids = np.empty(length, dtype=np.int64)
        ids[:2] = rng.integers(0, N_SYMBOLS, size=2)
        buy = i < n_buy
        for t in range(2, length):
            back = ids[t - 2]
            if rng.random() < stick:
                if buy:
                    ids[t] = back
                else:
                    others = [v for v in range(N_SYMBOLS) if v != back]
                    ids[t] = others[int(rng.integers(0, len(others)))]
            else:
                ids[t] = rng.integers(0, N_SYMBOLS)
        label = LABEL_BUY if buy else LABEL_NOBUY
        sessions.append(LabeledSession(tuple(SYMBOLS[v] for v in ids), label))
    return Dataset(sessions, "synthetic", meta={"seed": seed, "preset": "order2"})


CHAIN_PRESETS = ("identical", "separable-mid", "disjoint")
PRESETS = CHAIN_PRESETS + ("longrange", "order2")


def generate_preset(
    name: str,
    n_buy: int,
    n_nobuy: int,
    seed: int,
    length_dist: LengthDist | None = None,
) -> Dataset:
    """Generate a labeled dataset from a named preset."""
    if length_dist is None:
        length_dist = LengthDist.uniform(10, 20) if name == "longrange" else LengthDist.uniform()
    length_dist.validate()
    if name in CHAIN_PRESETS:
        return generate_dataset(make_preset_spec(name, n_buy, n_nobuy, seed, length_dist))
    if name == "longrange":
        return _generate_longrange(n_buy, n_nobuy, seed, length_dist)
    if name == "order2":
        return _generate_order2(n_buy, n_nobuy, seed, length_dist)
    raise SpecError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")


def spec_from_config(parser) -> GeneratorSpec:
    """Build a GeneratorSpec from a key = value config file.

    Expected sections: [generator] with seed/n_buy/n_nobuy and optional
    length_min/length_max, plus [buy_chain] and [nobuy_chain] each holding
    an `init` row and one row per symbol name.
    """
    if not parser.has_section("generator"):
        raise SpecError("config needs a [generator] section")
    gen = parser["generator"]
    try:
        seed = int(gen.get("seed", "0"))
        n_buy = int(gen["n_buy"])
        n_nobuy = int(gen["n_nobuy"])
    except (KeyError, ValueError) as exc:
        raise SpecError(f"bad [generator] section: {exc}") from exc
    low = int(gen.get("length_min", "10"))
    high = int(gen.get("length_max", "60"))
    length_dist = LengthDist.uniform(low, high)
    if "length_probs" in gen:
        lengths = np.asarray(parse_ints(gen.get("lengths", "")), dtype=np.int64)
        probs = np.asarray(parse_floats(gen["length_probs"]))
        length_dist = LengthDist(lengths, probs)

    def chain_from(section: str) -> ChainSpec:
        if not parser.has_section(section):
            raise SpecError(f"config needs a [{section}] section")
        sec = parser[section]
        try:
            init = np.asarray(parse_floats(sec["init"]))
            rows = [np.asarray(parse_floats(sec[name])) for name in SYMBOLS]
        except KeyError as exc:
            raise SpecError(f"[{section}] missing row {exc.args[0]!r}") from exc
        return ChainSpec(init, np.vstack(rows))

    spec = GeneratorSpec(
        chain_from("buy_chain"),
        chain_from("nobuy_chain"),
        length_dist,
        n_buy,
        n_nobuy,
        seed,
    )
    spec.validate()
    return spec
