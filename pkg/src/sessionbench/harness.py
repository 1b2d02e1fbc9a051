"""Benchmark orchestration: splits, balancing, grid search, repeated runs.

The protocol per model: pick hyperparameters by validation accuracy (one
seeded grid pass), then train `runs` independent seeded instances of the
winning configuration and report mean and sample standard deviation of
test accuracy. Markov and visibility-graph models are deterministic and
default to a single run.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import lm as lm_mod
from . import markov as markov_mod
from . import s2l as s2l_mod
from . import vg as vg_mod
from ._kernels import BACKEND
from .config import load_config, parse_bool, parse_floats, parse_ints, parse_tokens
from .errors import DataError, InputError, SessionbenchError
from .sessions import LABEL_BUY, LABEL_NOBUY, Dataset, read_tsv
from .synthetic import LengthDist, generate_preset

MODEL_KINDS = ("markov", "lm", "vg", "s2l-avg", "s2l-last")
MODEL_LABELS = {
    "markov": "Markov Chain",
    "lm": "LSTM - Language Model",
    "vg": "Visibility Graphs",
    "s2l-avg": "LSTM - S2L ('avg')",
    "s2l-last": "LSTM - S2L ('last')",
}


def derive_seed(master: int, *parts: int) -> int:
    """Fixed-arithmetic seed expansion (documented, collision-resistant)."""
    state = (master * 2 + 1) % (2**63)
    for p in parts:
        state = (state * 1_000_003 + p + 0x9E3779B9) % (2**63)
    return state


@dataclass
class SplitSpec:
    train: float = 0.70
    val: float = 0.15
    test: float = 0.15
    stratified: bool = True
    seed: int = 0

    def validate(self) -> None:
        ratios = (self.train, self.val, self.test)
        if any(r <= 0 for r in ratios):
            raise InputError("split ratios must be positive")
        if abs(sum(ratios) - 1.0) > 1e-9:
            raise InputError(f"split ratios must sum to 1, got {sum(ratios)}")


def _allocate(n: int, ratios: tuple[float, float, float]) -> tuple[int, int, int]:
    # Largest-remainder allocation; deterministic tie order train > val > test.
    exact = [n * r for r in ratios]
    counts = [int(np.floor(e)) for e in exact]
    remainder = n - sum(counts)
    order = sorted(range(3), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in range(remainder):
        counts[order[i]] += 1
    return counts[0], counts[1], counts[2]


def split(data: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Deterministic stratified (or plain) 3-way split."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    ratios = (spec.train, spec.val, spec.test)
    groups = (
        [data.by_label(LABEL_BUY), data.by_label(LABEL_NOBUY)]
        if spec.stratified
        else [list(data.sessions)]
    )
    parts: tuple[list, list, list] = ([], [], [])
    for group in groups:
        if not group:
            continue
        n_train, n_val, n_test = _allocate(len(group), ratios)
        if spec.stratified and min(n_train, n_val, n_test) < 1:
            raise DataError(
                f"stratified split infeasible: a class with {len(group)} sessions "
                f"cannot fill all three splits"
            )
        perm = rng.permutation(len(group))
        shuffled = [group[i] for i in perm]
        parts[0].extend(shuffled[:n_train])
        parts[1].extend(shuffled[n_train : n_train + n_val])
        parts[2].extend(shuffled[n_train + n_val :])
    return tuple(
        Dataset(part, data.provenance, meta={"split": name, "seed": spec.seed})
        for part, name in zip(parts, ("train", "val", "test"))
    )


def balance(data: Dataset, strategy: str = "downsample", seed: int = 0) -> Dataset:
    """Downsample the majority class to the minority count, or pass through."""
    if strategy == "none":
        return Dataset(list(data.sessions), data.provenance, dict(data.meta))
    if strategy != "downsample":
        raise InputError(f"unknown balance strategy {strategy!r}")
    n_buy, n_nobuy = data.n_buy, data.n_nobuy
    if n_buy == 0 or n_nobuy == 0:
        raise DataError("balancing needs both classes present")
    majority = LABEL_NOBUY if n_nobuy >= n_buy else LABEL_BUY
    target = min(n_buy, n_nobuy)
    rng = np.random.default_rng(seed)
    major_idx = [i for i, s in enumerate(data.sessions) if s.label == majority]
    keep = set(np.asarray(major_idx)[rng.permutation(len(major_idx))[:target]].tolist())
    sessions = [
        s for i, s in enumerate(data.sessions) if s.label != majority or i in keep
    ]
    return Dataset(sessions, data.provenance, meta={**data.meta, "balanced": strategy})


def evaluate(model, test: Dataset) -> float:
    """Fraction of sessions whose predicted label matches the true label."""
    if len(test) == 0:
        raise InputError("cannot evaluate on an empty test set")
    if isinstance(model, markov_mod.MarkovMixture):
        return markov_mod.accuracy(model, test)
    if isinstance(model, lm_mod.LmMixture):
        return lm_mod.mixture_accuracy(model, test)
    if isinstance(model, s2l_mod.S2lModel):
        return s2l_mod.accuracy(model, test)
    if isinstance(model, vg_mod.VgPipeline):
        return vg_mod.pipeline_accuracy(model, test)
    hits = sum(1 for s in test if model.classify(s.symbols) == s.label)
    return hits / len(test)


@dataclass
class TrainResult:
    kind: str
    model: object
    hyperparams: dict
    val_accuracy: float
    curves: dict[str, list[dict]]


def run_training(
    kind: str,
    hyperparams: dict,
    train: Dataset,
    val: Dataset,
    patience: int = 10,
    max_epochs: int = 50,
    seed: int = 0,
) -> TrainResult:
    """Dispatch one training job; epoch-free models record a single point."""
    hp = dict(hyperparams)
    if kind == "markov":
        order = int(hp.get("order", markov_mod.DEFAULT_ORDER))
        alpha = float(hp.get("alpha", markov_mod.DEFAULT_ALPHA))
        priors = hp.get("priors", "empirical")
        model = markov_mod.fit_mixture(train, order, alpha, priors)
        val_acc = markov_mod.accuracy(model, val)
        curves = {"model": [{"epoch": 1, "val_metric": val_acc, "best_so_far": val_acc}]}
        return TrainResult(kind, model, {"order": order, "alpha": alpha}, val_acc, curves)
    if kind == "lm":
        mixture, curves = lm_mod.fit_lm_mixture(
            train,
            val,
            hidden=int(hp.get("hidden", 20)),
            lr=float(hp.get("lr", 0.01)),
            batch_size=int(hp.get("batch", 20)),
            seed=seed,
            patience=patience,
            max_epochs=max_epochs,
            val_metric=hp.get("val_metric", "token"),
            priors=hp.get("priors", "empirical"),
        )
        val_acc = lm_mod.mixture_accuracy(mixture, val)
        chosen = {k: hp[k] for k in ("hidden", "lr", "batch") if k in hp}
        return TrainResult(kind, mixture, chosen, val_acc, curves)
    if kind in ("s2l-avg", "s2l-last"):
        pooling = s2l_mod.POOL_AVG if kind == "s2l-avg" else s2l_mod.POOL_LAST
        model, curve = s2l_mod.fit_s2l(
            train,
            val,
            pooling=pooling,
            hidden=int(hp.get("hidden", 20)),
            lr=float(hp.get("lr", 0.01)),
            batch_size=int(hp.get("batch", 20)),
            seed=seed,
            patience=patience,
            max_epochs=max_epochs,
        )
        val_acc = max(entry["val_metric"] for entry in curve)
        chosen = {k: hp[k] for k in ("hidden", "lr", "batch") if k in hp}
        return TrainResult(kind, model, chosen, val_acc, {"model": curve})
    if kind == "vg":
        model = vg_mod.fit_pipeline(
            train,
            k=int(hp.get("k", 1)),
            codebook=tuple(hp.get("codebook", vg_mod.DEFAULT_CODEBOOK)),
            variance_target=float(hp.get("variance_target", 0.95)),
            C=float(hp.get("C", 1.0)),
            epochs=int(hp.get("epochs", 2000)),
            seed=seed,
        )
        val_acc = vg_mod.pipeline_accuracy(model, val)
        curves = {"model": [{"epoch": 1, "val_metric": val_acc, "best_so_far": val_acc}]}
        chosen = {
            "k": int(hp.get("k", 1)),
            "C": float(hp.get("C", 1.0)),
            "variance_target": float(hp.get("variance_target", 0.95)),
            "codebook": ">".join(hp.get("codebook", vg_mod.DEFAULT_CODEBOOK)),
        }
        return TrainResult(kind, model, chosen, val_acc, curves)
    raise InputError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


# ---------------------------------------------------------------------------
# Benchmark configuration


@dataclass
class NeuralGrid:
    hidden: list[int] = field(default_factory=lambda: list(lm_mod.HIDDEN_GRID))
    lr: list[float] = field(default_factory=lambda: list(lm_mod.LR_GRID))
    batch: list[int] = field(default_factory=lambda: list(lm_mod.BATCH_GRID))

    def points(self) -> list[dict]:
        return [
            {"hidden": h, "lr": lr, "batch": b}
            for h, lr, b in itertools.product(self.hidden, self.lr, self.batch)
        ]


@dataclass
class BenchmarkConfig:
    dataset_path: str | None = None
    preset: str | None = None
    n_buy: int = 1000
    n_nobuy: int = 1000
    data_seed: int = 0
    length_min: int = 10
    length_max: int = 60
    balance_strategy: str = "downsample"
    split: SplitSpec = field(default_factory=SplitSpec)
    master_seed: int = 7
    models: list[str] = field(default_factory=lambda: list(MODEL_KINDS))
    runs: dict[str, int] = field(default_factory=dict)
    markov_orders: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5, 6, 7, 8])
    markov_alpha: float = 1.0
    priors: str = "empirical"
    lm_grid: NeuralGrid = field(default_factory=NeuralGrid)
    s2l_grid: NeuralGrid = field(default_factory=NeuralGrid)
    lm_val_metric: str = "token"
    patience: int = 10
    max_epochs: int = 50
    vg_k: int = 1
    vg_codebook: tuple[str, ...] = vg_mod.DEFAULT_CODEBOOK
    vg_variance_target: float = 0.95
    vg_c: float = 1.0
    vg_epochs: int = 2000

    def runs_for(self, kind: str) -> int:
        if kind in self.runs:
            return self.runs[kind]
        return 1 if kind in ("markov", "vg") else 10


def load_benchmark_config(path) -> BenchmarkConfig:
    parser = load_config(path)
    cfg = BenchmarkConfig()
    if parser.has_section("data"):
        sec = parser["data"]
        cfg.dataset_path = sec.get("dataset", None)
        cfg.preset = sec.get("preset", None)
        cfg.n_buy = int(sec.get("n_buy", cfg.n_buy))
        cfg.n_nobuy = int(sec.get("n_nobuy", cfg.n_nobuy))
        cfg.data_seed = int(sec.get("seed", cfg.data_seed))
        cfg.length_min = int(sec.get("length_min", cfg.length_min))
        cfg.length_max = int(sec.get("length_max", cfg.length_max))
        cfg.balance_strategy = sec.get("balance", cfg.balance_strategy)
        if "split" in sec:
            ratios = parse_floats(sec["split"])
            if len(ratios) != 3:
                raise DataError("split must give three ratios")
            cfg.split.train, cfg.split.val, cfg.split.test = ratios
        if "stratified" in sec:
            cfg.split.stratified = parse_bool(sec["stratified"])
    if parser.has_section("benchmark"):
        sec = parser["benchmark"]
        cfg.master_seed = int(sec.get("master_seed", cfg.master_seed))
        if "models" in sec:
            cfg.models = parse_tokens(sec["models"])
        for kind in MODEL_KINDS:
            key = f"runs_{kind.replace('-', '_')}"
            if key in sec:
                cfg.runs[kind] = int(sec[key])
        cfg.patience = int(sec.get("patience", cfg.patience))
        cfg.max_epochs = int(sec.get("max_epochs", cfg.max_epochs))
    if parser.has_section("markov"):
        sec = parser["markov"]
        if "orders" in sec:
            cfg.markov_orders = parse_ints(sec["orders"])
        cfg.markov_alpha = float(sec.get("alpha", cfg.markov_alpha))
        cfg.priors = sec.get("priors", cfg.priors)
    for grid_name, grid in (("lm", cfg.lm_grid), ("s2l", cfg.s2l_grid)):
        if parser.has_section(grid_name):
            sec = parser[grid_name]
            if "hidden" in sec:
                grid.hidden = parse_ints(sec["hidden"])
            if "lr" in sec:
                grid.lr = parse_floats(sec["lr"])
            if "batch" in sec:
                grid.batch = parse_ints(sec["batch"])
    if parser.has_section("lm"):
        cfg.lm_val_metric = parser["lm"].get("val_metric", cfg.lm_val_metric)
    if parser.has_section("vg"):
        sec = parser["vg"]
        cfg.vg_k = int(sec.get("k", cfg.vg_k))
        if "codebook" in sec:
            cfg.vg_codebook = tuple(parse_tokens(sec["codebook"]))
        cfg.vg_variance_target = float(sec.get("variance_target", cfg.vg_variance_target))
        cfg.vg_c = float(sec.get("svm_c", cfg.vg_c))
        cfg.vg_epochs = int(sec.get("svm_epochs", cfg.vg_epochs))
    unknown = [m for m in cfg.models if m not in MODEL_KINDS]
    if unknown:
        raise DataError(f"unknown models in config: {unknown}")
    return cfg


def dataset_fingerprint(data: Dataset) -> str:
    digest = hashlib.sha256()
    for s in data.sessions:
        digest.update(f"{s.label}\t{' '.join(s.symbols)}\n".encode())
    return digest.hexdigest()


def load_benchmark_dataset(cfg: BenchmarkConfig) -> Dataset:
    if cfg.dataset_path:
        return read_tsv(cfg.dataset_path)
    if cfg.preset:
        return generate_preset(
            cfg.preset,
            cfg.n_buy,
            cfg.n_nobuy,
            cfg.data_seed,
            LengthDist.uniform(cfg.length_min, cfg.length_max),
        )
    raise DataError("config must name either a dataset file or a preset")


# ---------------------------------------------------------------------------
# The benchmark protocol


@dataclass
class ModelRow:
    kind: str
    label: str
    accuracies: list[float]
    hyperparams: dict
    error: str | None = None

    @property
    def mean(self) -> float | None:
        return float(np.mean(self.accuracies)) if self.accuracies else None

    @property
    def std(self) -> float | None:
        if len(self.accuracies) > 1:
            return float(np.std(self.accuracies, ddof=1))
        return None


@dataclass
class BenchmarkReport:
    rows: list[ModelRow]
    metadata: dict
    runs_log: dict

    def to_csv(self) -> str:
        lines = ["# sessionbench benchmark report"]
        for key in sorted(self.metadata):
            if key == "timestamp":
                continue  # reproducible output: timestamps live in markdown only
            lines.append(f"# {key}={self.metadata[key]}")
        lines.append("model,mean_accuracy,std_accuracy,runs,hyperparameters")
        for row in self.rows:
            if row.error is not None:
                lines.append(f"{row.label},,,0,error={row.error}")
                continue
            mean = f"{row.mean:.10f}"
            std = f"{row.std:.10f}" if row.std is not None else ""
            hp = " ".join(f"{k}={row.hyperparams[k]}" for k in sorted(row.hyperparams))
            lines.append(f"{row.label},{mean},{std},{len(row.accuracies)},{hp}")
        return "\n".join(lines) + "\n"

    def to_markdown(self) -> str:
        lines = ["# Benchmark report", "", "| Model | Accuracy |", "| --- | --- |"]
        for row in self.rows:
            if row.error is not None:
                lines.append(f"| {row.label} | failed: {row.error} |")
            elif row.std is not None:
                lines.append(f"| {row.label} | {row.mean:.3f} (±{row.std:.3f}) |")
            else:
                lines.append(f"| {row.label} | {row.mean:.3f} |")
        lines.append("")
        for key in sorted(self.metadata):
            lines.append(f"- {key}: {self.metadata[key]}")
        lines.append("")
        for row in self.rows:
            if row.error is None:
                hp = ", ".join(f"{k}={row.hyperparams[k]}" for k in sorted(row.hyperparams))
                lines.append(f"- {row.label}: runs={len(row.accuracies)}, {hp}")
        return "\n".join(lines) + "\n"


def _grid_for(cfg: BenchmarkConfig, kind: str) -> list[dict]:
    if kind == "markov":
        return [
            {"order": k, "alpha": cfg.markov_alpha, "priors": cfg.priors}
            for k in cfg.markov_orders
        ]
    if kind == "lm":
        points = cfg.lm_grid.points()
        for p in points:
            p["val_metric"] = cfg.lm_val_metric
            p["priors"] = cfg.priors
        return points
    if kind in ("s2l-avg", "s2l-last"):
        return cfg.s2l_grid.points()
    if kind == "vg":
        return [
            {
                "k": cfg.vg_k,
                "codebook": cfg.vg_codebook,
                "variance_target": cfg.vg_variance_target,
                "C": cfg.vg_c,
                "epochs": cfg.vg_epochs,
            }
        ]
    raise InputError(f"unknown model kind {kind!r}")


def benchmark(cfg: BenchmarkConfig) -> BenchmarkReport:
    """Run the full protocol and assemble the five-row benchmark report."""
    data = load_benchmark_dataset(cfg)
    balanced = balance(data, cfg.balance_strategy, derive_seed(cfg.master_seed, 1))
    split_spec = SplitSpec(
        cfg.split.train,
        cfg.split.val,
        cfg.split.test,
        cfg.split.stratified,
        seed=derive_seed(cfg.master_seed, 2),
    )
    train, val, test = split(balanced, split_spec)
    rows: list[ModelRow] = []
    runs_log: dict = {"models": {}}
    ordered = [k for k in MODEL_KINDS if k in cfg.models]
    for model_idx, kind in enumerate(ordered):
        try:
            row, log = _benchmark_one(cfg, kind, model_idx, train, val, test)
        except SessionbenchError as exc:
            row = ModelRow(kind, MODEL_LABELS[kind], [], {}, error=str(exc))
            log = {"error": str(exc)}
        rows.append(row)
        runs_log["models"][kind] = log
    metadata = {
        "dataset_fingerprint": dataset_fingerprint(data),
        "master_seed": cfg.master_seed,
        "balance": cfg.balance_strategy,
        "split": f"{cfg.split.train}/{cfg.split.val}/{cfg.split.test}",
        "stratified": cfg.split.stratified,
        "n_train": len(train),
        "n_val": len(val),
        "n_test": len(test),
        "backend": BACKEND,
        "lm_val_metric": cfg.lm_val_metric,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    runs_log["metadata"] = {k: v for k, v in metadata.items() if k != "timestamp"}
    return BenchmarkReport(rows, metadata, runs_log)


def _benchmark_one(
    cfg: BenchmarkConfig,
    kind: str,
    model_idx: int,
    train: Dataset,
    val: Dataset,
    test: Dataset,
) -> tuple[ModelRow, dict]:
    grid = _grid_for(cfg, kind)
    grid_seed = derive_seed(cfg.master_seed, 10, model_idx)
    grid_log = []
    best_hp = None
    best_acc = -1.0
    if len(grid) == 1:
        best_hp = grid[0]
    else:
        for point in grid:
            result = run_training(
                kind, point, train, val, cfg.patience, cfg.max_epochs, grid_seed
            )
            grid_log.append({"hyperparams": _plain(point), "val_accuracy": result.val_accuracy})
            if result.val_accuracy > best_acc:
                best_acc = result.val_accuracy
                best_hp = point
    assert best_hp is not None
    n_runs = cfg.runs_for(kind)
    accuracies: list[float] = []
    run_entries = []
    chosen: dict = {}
    for run_idx in range(n_runs):
        run_seed = derive_seed(cfg.master_seed, 20, model_idx, run_idx)
        result = run_training(
            kind, best_hp, train, val, cfg.patience, cfg.max_epochs, run_seed
        )
        chosen = result.hyperparams
        test_acc = evaluate(result.model, test)
        accuracies.append(test_acc)
        run_entries.append(
            {
                "run": run_idx,
                "seed": run_seed,
                "val_accuracy": result.val_accuracy,
                "test_accuracy": test_acc,
                "curves": result.curves,
            }
        )
    row = ModelRow(kind, MODEL_LABELS[kind], accuracies, chosen)
    log = {
        "grid": grid_log,
        "chosen": _plain(best_hp),
        "patience": cfg.patience,
        "max_epochs": cfg.max_epochs,
        "runs": run_entries,
    }
    return row, log


def _plain(obj):
    """JSON-friendly copy of a hyperparameter dict."""
    out = {}
    for k, v in obj.items():
        out[k] = list(v) if isinstance(v, tuple) else v
    return out


def load_model_file(path):
    """Load any trained-model checkpoint, dispatching on its header."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
    if first == "markov-mixture v1":
        return markov_mod.load_mixture(path)
    if first == "sessionbench-ckpt v1":
        from .nn.checkpoint import load_tensors

        meta, _ = load_tensors(path)
        kind = meta.get("kind")
        if kind == "lm":
            return lm_mod.load_mixture(path)
        if kind == "s2l":
            return s2l_mod.load_model(path)
        if kind == "vg":
            return vg_mod.load_pipeline(path)
        raise DataError(f"unknown checkpoint kind {kind!r} in {path}")
    raise DataError(f"unrecognized model file {path}")


def report_from_runs(runs_log: dict) -> BenchmarkReport:
    """Rebuild a report from a runs.json payload."""
    rows: list[ModelRow] = []
    models = runs_log.get("models", {})
    for kind in MODEL_KINDS:
        if kind not in models:
            continue
        log = models[kind]
        if "error" in log:
            rows.append(ModelRow(kind, MODEL_LABELS[kind], [], {}, error=log["error"]))
            continue
        accuracies = [entry["test_accuracy"] for entry in log.get("runs", [])]
        chosen = log.get("chosen", {})
        hp = {
            k: (">".join(v) if isinstance(v, (list, tuple)) else v)
            for k, v in chosen.items()
            if k
            in ("order", "alpha", "hidden", "lr", "batch", "k", "C", "variance_target", "codebook")
        }
        rows.append(ModelRow(kind, MODEL_LABELS[kind], accuracies, hp))
    return BenchmarkReport(rows, dict(runs_log.get("metadata", {})), runs_log)


def write_report(report: BenchmarkReport, out_dir) -> dict[str, str]:
    """Write report.csv, report.md, runs.json, and per-model grid CSVs."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "csv": os.path.join(out_dir, "report.csv"),
        "markdown": os.path.join(out_dir, "report.md"),
        "runs": os.path.join(out_dir, "runs.json"),
    }
    with open(paths["csv"], "w", encoding="utf-8", newline="") as fh:
        fh.write(report.to_csv())
    with open(paths["markdown"], "w", encoding="utf-8", newline="") as fh:
        fh.write(report.to_markdown())
    with open(paths["runs"], "w", encoding="utf-8", newline="") as fh:
        json.dump(report.runs_log, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for kind, log in report.runs_log.get("models", {}).items():
        grid = log.get("grid") if isinstance(log, dict) else None
        if not grid:
            continue
        seen = {k for entry in grid for k in entry["hyperparams"]}
        keys = [k for k in ("order", "alpha", "hidden", "lr", "batch") if k in seen]
        grid_path = os.path.join(out_dir, f"grid-{kind}.csv")
        with open(grid_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(keys + ["val_metric"]) + "\n")
            for entry in grid:
                row = [str(entry["hyperparams"].get(k, "")) for k in keys]
                fh.write(",".join(row + [f"{entry['val_accuracy']:.10f}"]) + "\n")
        paths[f"grid-{kind}"] = grid_path
    return paths
