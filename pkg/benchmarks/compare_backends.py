"""Benchmark the compiled kernels against the pure numpy fallback.

Times the two hot paths (LSTM forward/backward over a padded batch, HVG
construction + motif window codes over many sessions) for every backend
that can be imported, and prints a comparison table.

Usage: python benchmarks/compare_backends.py [--repeats 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from sessionbench._kernels import available_backends


def time_call(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def lstm_case(rng, B=20, T=60, H=40, D=6):
    tokens = rng.integers(0, D, size=(B, T)).astype(np.int64)
    lengths = rng.integers(T // 2, T + 1, size=B).astype(np.int64)
    wx = rng.normal(0, 0.3, (4 * H, D))
    wh = rng.normal(0, 0.3, (4 * H, H))
    bias = rng.normal(0, 0.1, 4 * H)
    d_h = rng.normal(size=(T, B, H))
    return tokens, lengths, wx, wh, bias, d_h


def series_case(rng, n_series=2000, low=10, high=200):
    return [
        rng.integers(1, 7, size=int(rng.integers(low, high + 1)))
        for _ in range(n_series)
    ]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    backends = available_backends()
    rng = np.random.default_rng(0)
    tokens, lengths, wx, wh, bias, d_h = lstm_case(rng)
    series = series_case(rng)

    cases = {}
    for name, impl in backends.items():
        outs = impl.lstm_forward(tokens, lengths, wx, wh, bias)
        cases[name] = {
            "lstm forward (B=20,T=60,H=40)": lambda impl=impl: impl.lstm_forward(
                tokens, lengths, wx, wh, bias
            ),
            "lstm backward (B=20,T=60,H=40)": lambda impl=impl, outs=outs: impl.lstm_backward(
                tokens, lengths, wx.shape[1], wh, *outs, d_h
            ),
            "hvg edges (2000 series)": lambda impl=impl: [
                impl.hvg_edges(s) for s in series
            ],
            "window codes (2000 series)": lambda impl=impl: [
                impl.window_codes(s) for s in series
            ],
        }

    results: dict[str, dict[str, float]] = {name: {} for name in backends}
    for name in backends:
        for label, fn in cases[name].items():
            results[name][label] = time_call(fn, args.repeats)

    labels = list(next(iter(cases.values())))
    width = max(len(label) for label in labels)
    header = f"{'kernel':<{width}}"
    for name in backends:
        header += f"  {name:>12}"
    if len(backends) == 2:
        header += f"  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for label in labels:
        line = f"{label:<{width}}"
        for name in backends:
            line += f"  {results[name][label] * 1e3:>10.2f}ms"
        if len(backends) == 2:
            ratio = results["python"][label] / results["cython"][label]
            line += f"  {ratio:>7.1f}x"
        print(line)
    if len(backends) < 2:
        print("\n(compiled backend unavailable; only the pure backend was timed)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
