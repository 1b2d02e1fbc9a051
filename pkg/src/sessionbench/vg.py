"""Visibility-graph features, PCA reduction, and a linear SVM classifier.

Sessions are ordinal-encoded (optionally as overlapping k-grams), turned
into horizontal visibility graphs under the strict criterion (ties block
visibility), summarized as size-4 sequential motif frequencies plus degree
statistics, standardized and projected by PCA, and separated by a linear
SVM trained with deterministic full-batch subgradient descent.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import FitError, InputError, ParseError
from .nn.checkpoint import load_tensors, save_tensors
from .sessions import LABEL_BUY, LABEL_NOBUY, SYMBOLS, Dataset

# Default ordinal code-book: categories in funnel order (view through
# remove-from-cart). Configurable because the category-to-level mapping is
# a modeling choice the visibility features are sensitive to.
DEFAULT_CODEBOOK = SYMBOLS

MOTIF_WINDOW = 4
MOTIF_VALUE_RANGE = 6

# The three non-backbone edges a 4-point window can carry, in bit order
# matching the window_codes kernel.
_OPTIONAL_EDGES = ((0, 2), (1, 3), (0, 3))


def encode_series(
    symbols: Sequence[str], k: int = 1, codebook: Sequence[str] = DEFAULT_CODEBOOK
) -> np.ndarray:
    """Ordinal codes (1-based) of symbols, or of overlapping k-grams.

    For k > 1 each k-gram is mapped to its lexicographic rank + 1 among
    all 5^k k-grams under the code-book order; output length is |s|-k+1.
    """
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    if len(symbols) < k:
        raise InputError(f"need at least {k} symbols to form k-grams, got {len(symbols)}")
    code_of = {s: i for i, s in enumerate(codebook)}
    try:
        base = np.array([code_of[s] for s in symbols], dtype=np.int64)
    except KeyError as exc:
        raise InputError(f"symbol {exc.args[0]!r} outside the code-book") from exc
    if k == 1:
        return base + 1
    n_codes = len(codebook)
    out = np.zeros(len(base) - k + 1, dtype=np.int64)
    for offset in range(k):
        out = out * n_codes + base[offset : offset + len(out)]
    return out + 1


@dataclass(frozen=True)
class HvgGraph:
    n: int
    edges: frozenset[tuple[int, int]]

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg


def hvg(series) -> HvgGraph:
    """Horizontal visibility graph via the single-pass monotone stack."""
    values = np.asarray(series, dtype=np.int64)
    if values.ndim != 1 or len(values) == 0:
        raise InputError("series must be a non-empty 1-d array")
    pairs = _kernels.hvg_edges(values)
    return HvgGraph(len(values), frozenset((int(i), int(j)) for i, j in pairs))


def hvg_bruteforce(series) -> HvgGraph:
    """Oracle: evaluate the edge criterion directly for every pair.

    For each left endpoint i the running maximum over intermediates is
    scanned once; (i, j) is an edge iff that maximum stays strictly below
    both endpoint values.
    """
    values = np.asarray(series, dtype=np.int64)
    if values.ndim != 1 or len(values) == 0:
        raise InputError("series must be a non-empty 1-d array")
    n = len(values)
    edges = set()
    for i in range(n - 1):
        edges.add((i, i + 1))
        if i + 2 < n:
            inter_max = np.maximum.accumulate(values[i + 1 : n - 1])
            js = np.arange(i + 2, n)
            visible = (inter_max < values[i]) & (inter_max < values[js])
            for j in js[visible]:
                edges.add((i, int(j)))
    return HvgGraph(n, frozenset(edges))


@lru_cache(maxsize=None)
def enumerate_admissible_motifs(
    window: int = MOTIF_WINDOW, value_range: int = MOTIF_VALUE_RANGE
) -> tuple[tuple[tuple[int, int], ...], ...]:
    """All edge patterns a length-`window` integer series can realize.

    Brute-forces every series over {1..value_range}, takes the HVG edge
    set of each, and returns the distinct patterns in a canonical order
    (fewest edges first, then lexicographic). Tie-bearing series admit
    patterns that tie-free real series cannot produce.
    """
    if window < 2:
        raise InputError(f"window must be >= 2, got {window}")
    patterns = set()
    for values in itertools.product(range(1, value_range + 1), repeat=window):
        graph = hvg_bruteforce(np.array(values, dtype=np.int64))
        patterns.add(tuple(sorted(graph.edges)))
    return tuple(sorted(patterns, key=lambda p: (len(p), p)))


def motif_names(motifs=None) -> list[str]:
    """Canonical names: the path backbone plus any optional edges."""
    motifs = motifs if motifs is not None else enumerate_admissible_motifs()
    names = []
    for pattern in motifs:
        window = max(j for _, j in pattern) + 1
        backbone = {(i, i + 1) for i in range(window - 1)}
        extras = sorted(set(pattern) - backbone)
        names.append("path" if not extras else "path+" + "+".join(f"{i}{j}" for i, j in extras))
    return names


@lru_cache(maxsize=None)
def _code_to_motif_index() -> dict[int, int]:
    """Map the kernel's 3-bit window codes onto admissible motif indices."""
    motifs = enumerate_admissible_motifs()
    backbone = {(i, i + 1) for i in range(MOTIF_WINDOW - 1)}
    mapping: dict[int, int] = {}
    for idx, pattern in enumerate(motifs):
        extras = set(pattern) - backbone
        code = sum(1 << bit for bit, edge in enumerate(_OPTIONAL_EDGES) if edge in extras)
        mapping[code] = idx
    return mapping


@dataclass
class FeatureVector:
    motif_profile: np.ndarray
    mean_degree: float
    max_degree: float
    degree_variance: float
    length: int

    def to_array(self) -> np.ndarray:
        return np.concatenate(
            [
                self.motif_profile,
                [self.mean_degree, self.max_degree, self.degree_variance, self.length],
            ]
        )


def feature_names() -> list[str]:
    return motif_names() + ["mean_degree", "max_degree", "degree_variance", "length"]


def motif_profile(series, session_length: int | None = None) -> FeatureVector:
    """Normalized size-4 motif frequencies plus full-graph degree stats.

    Window patterns are read off the window_codes kernel; by locality the
    induced subgraph on four consecutive nodes equals the HVG of the
    sub-series, so each window is classified in O(1).
    """
    values = np.asarray(series, dtype=np.int64)
    if len(values) < MOTIF_WINDOW:
        raise InputError(f"series shorter than the motif window ({MOTIF_WINDOW})")
    codes = _kernels.window_codes(values)
    mapping = _code_to_motif_index()
    n_motifs = len(enumerate_admissible_motifs())
    counts = np.zeros(n_motifs)
    for code, count in zip(*np.unique(codes, return_counts=True)):
        idx = mapping.get(int(code))
        if idx is None:
            raise InputError(f"window code {code} outside the admissible motif set")
        counts[idx] = count
    profile = counts / counts.sum()
    graph = hvg(values)
    degrees = graph.degrees()
    return FeatureVector(
        profile,
        float(degrees.mean()),
        float(degrees.max()),
        float(degrees.var()),
        int(session_length if session_length is not None else len(values)),
    )


# ---------------------------------------------------------------------------
# PCA


@dataclass
class PcaProjection:
    mean: np.ndarray  # (d,)
    scale: np.ndarray  # (d,)
    components: np.ndarray  # (d, r), orthonormal columns
    explained_variance: np.ndarray  # (r,), non-increasing
    retained_fraction: float

    def transform(self, features: np.ndarray) -> np.ndarray:
        return ((features - self.mean) / self.scale) @ self.components


def pca_fit(features: np.ndarray, variance_target: float = 0.95) -> PcaProjection:
    """Standardize, eigendecompose the covariance, keep the smallest r
    components whose cumulative explained variance reaches the target."""
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise FitError("PCA needs at least two feature rows")
    if not 0.0 < variance_target <= 1.0:
        raise InputError(f"variance_target must be in (0, 1], got {variance_target}")
    mean = X.mean(axis=0)
    std = X.std(axis=0, ddof=1)
    scale = np.where(std > 0, std, 1.0)
    Z = (X - mean) / scale
    cov = Z.T @ Z / (X.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    eigvals = np.clip(eigvals[::-1], 0.0, None)
    eigvecs = eigvecs[:, ::-1]
    total = eigvals.sum()
    if total <= 0.0:
        r = 1
    else:
        cum = np.cumsum(eigvals)
        r = int(np.searchsorted(cum, variance_target * total - 1e-12, side="left")) + 1
        r = min(r, X.shape[1])
    components = eigvecs[:, :r].copy()
    for col in range(r):
        pivot = int(np.argmax(np.abs(components[:, col])))
        if components[pivot, col] < 0:
            components[:, col] *= -1.0
    retained = float(eigvals[:r].sum() / total) if total > 0 else 1.0
    return PcaProjection(mean, scale, components, eigvals[:r].copy(), retained)


# ---------------------------------------------------------------------------
# Linear SVM


@dataclass
class LinearSvm:
    w: np.ndarray
    b: float
    C: float

    def margins(self, features: np.ndarray) -> np.ndarray:
        return features @ self.w + self.b


def svm_objective(svm: LinearSvm, features: np.ndarray, y: np.ndarray) -> float:
    hinge = np.maximum(0.0, 1.0 - y * svm.margins(features))
    return float(np.dot(svm.w, svm.w) / (2.0 * svm.C) + hinge.mean())


def svm_fit(
    features: np.ndarray,
    y: np.ndarray,
    C: float = 1.0,
    epochs: int = 2000,
    seed: int = 0,
) -> LinearSvm:
    """Deterministic full-batch subgradient descent with a 1/(lambda t) step.

    Objective: ||w||^2 / (2C) + mean hinge loss. Full-batch subgradients
    make the result invariant to duplicating the dataset; the seed is kept
    in the signature for interface stability but the default optimizer is
    deterministic and does not consume it.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(y, dtype=float)
    if C <= 0:
        raise InputError(f"C must be > 0, got {C}")
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise InputError("features must be (m, r) with one label per row")
    if len(np.unique(y)) < 2:
        raise FitError("SVM training needs both classes")
    lam = 1.0 / C
    radius = 1.0 / np.sqrt(lam)
    m = X.shape[0]
    w = np.zeros(X.shape[1])
    b = 0.0
    w_avg = np.zeros_like(w)
    b_avg = 0.0
    tail = max(1, epochs // 2)
    for t in range(1, epochs + 1):
        margins = y * (X @ w + b)
        viol = margins < 1.0
        eta = 1.0 / (lam * t)
        grad_w = lam * w - (y[viol] @ X[viol]) / m
        grad_b = -y[viol].sum() / m
        w = w - eta * grad_w
        b = b - eta * grad_b
        norm = np.linalg.norm(w)
        if norm > radius:
            w *= radius / norm
        if t > epochs - tail:
            w_avg += w
            b_avg += b
    return LinearSvm(w_avg / tail, float(b_avg / tail), C)


def svm_predict(svm: LinearSvm, features: np.ndarray) -> np.ndarray:
    """BUY iff the margin is strictly positive; an exact 0 goes NOBUY."""
    margins = np.atleast_1d(svm.margins(features))
    return np.where(margins > 0, LABEL_BUY, LABEL_NOBUY)


# ---------------------------------------------------------------------------
# End-to-end pipeline


@dataclass
class VgPipeline:
    codebook: tuple[str, ...]
    k: int
    pca: PcaProjection
    svm: LinearSvm

    def features(self, symbols: Sequence[str]) -> np.ndarray:
        series = encode_series(symbols, self.k, self.codebook)
        return motif_profile(series, session_length=len(symbols)).to_array()

    def classify(self, symbols: Sequence[str]) -> str:
        projected = self.pca.transform(self.features(symbols)[None, :])
        return str(svm_predict(self.svm, projected)[0])


def feature_matrix(
    data: Dataset, k: int = 1, codebook: Sequence[str] = DEFAULT_CODEBOOK
) -> tuple[np.ndarray, np.ndarray]:
    """Stacked feature rows and +-1 labels (BUY = +1)."""
    rows = []
    labels = []
    for session in data:
        series = encode_series(session.symbols, k, codebook)
        rows.append(motif_profile(series, session_length=len(session)).to_array())
        labels.append(1.0 if session.label == LABEL_BUY else -1.0)
    return np.vstack(rows), np.array(labels)


def fit_pipeline(
    train: Dataset,
    k: int = 1,
    codebook: Sequence[str] = DEFAULT_CODEBOOK,
    variance_target: float = 0.95,
    C: float = 1.0,
    epochs: int = 2000,
    seed: int = 0,
) -> VgPipeline:
    if train.n_buy == 0 or train.n_nobuy == 0:
        raise FitError("training set must contain both classes")
    X, y = feature_matrix(train, k, codebook)
    pca = pca_fit(X, variance_target)
    svm = svm_fit(pca.transform(X), y, C=C, epochs=epochs, seed=seed)
    return VgPipeline(tuple(codebook), k, pca, svm)


def pipeline_accuracy(pipeline: VgPipeline, data: Dataset) -> float:
    if len(data) == 0:
        raise InputError("cannot evaluate on an empty dataset")
    X = np.vstack([pipeline.features(s.symbols) for s in data])
    predicted = svm_predict(pipeline.svm, pipeline.pca.transform(X))
    return float(np.mean([p == s.label for p, s in zip(predicted, data)]))


def write_features_csv(path, data: Dataset, k: int = 1, codebook=DEFAULT_CODEBOOK) -> None:
    X, y = feature_matrix(data, k, codebook)
    names = feature_names()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(["label"] + names) + "\n")
        for label, row in zip(y, X):
            tag = LABEL_BUY if label > 0 else LABEL_NOBUY
            fh.write(tag + "," + ",".join(f"{v:.10g}" for v in row) + "\n")


def save_pipeline(pipeline: VgPipeline, path) -> None:
    meta = {
        "kind": "vg",
        "k": str(pipeline.k),
        "codebook": " ".join(pipeline.codebook),
        "motifs": ";".join(motif_names()),
        "svm_c": float(pipeline.svm.C).hex(),
        "retained_fraction": float(pipeline.pca.retained_fraction).hex(),
    }
    tensors = {
        "pca.mean": pipeline.pca.mean,
        "pca.scale": pipeline.pca.scale,
        "pca.components": pipeline.pca.components,
        "pca.explained": pipeline.pca.explained_variance,
        "svm.w": pipeline.svm.w,
        "svm.b": np.array([pipeline.svm.b]),
    }
    save_tensors(path, meta, tensors)


def load_pipeline(path) -> VgPipeline:
    meta, tensors = load_tensors(path)
    if meta.get("kind") != "vg":
        raise ParseError(1, f"expected a vg checkpoint, got kind {meta.get('kind')!r}")
    pca = PcaProjection(
        tensors["pca.mean"],
        tensors["pca.scale"],
        tensors["pca.components"],
        tensors["pca.explained"],
        float.fromhex(meta["retained_fraction"]),
    )
    svm = LinearSvm(tensors["svm.w"], float(tensors["svm.b"][0]), float.fromhex(meta["svm_c"]))
    return VgPipeline(tuple(meta["codebook"].split(" ")), int(meta["k"]), pca, svm)
