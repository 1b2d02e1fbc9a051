"""Cross-backend kernel equivalence and backend selection."""

import os
import subprocess
import sys

import numpy as np
import pytest

from sessionbench import _kernels
from sessionbench._kernels import available_backends

BACKENDS = available_backends()
HAVE_BOTH = len(BACKENDS) == 2

pytestmark = pytest.mark.skipif(
    not HAVE_BOTH, reason="compiled backend not built; nothing to cross-check"
)


def random_case(rng, B=4, T=9, H=5, D=6):
    tokens = rng.integers(0, D, size=(B, T)).astype(np.int64)
    lengths = rng.integers(1, T + 1, size=B).astype(np.int64)
    wx = rng.normal(0, 0.5, (4 * H, D))
    wh = rng.normal(0, 0.5, (4 * H, H))
    bias = rng.normal(0, 0.2, 4 * H)
    return tokens, lengths, wx, wh, bias


class TestLstmEquivalence:
    def test_forward_outputs_match(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            tokens, lengths, wx, wh, bias = random_case(rng)
            outs = {
                name: impl.lstm_forward(tokens, lengths, wx, wh, bias)
                for name, impl in BACKENDS.items()
            }
            for a, b in zip(outs["python"], outs["cython"]):
                assert np.abs(a - b).max() < 1e-12

    def test_backward_gradients_match(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            tokens, lengths, wx, wh, bias = random_case(rng)
            d_h = rng.normal(size=(9, 4, 5))
            grads = {}
            for name, impl in BACKENDS.items():
                outs = impl.lstm_forward(tokens, lengths, wx, wh, bias)
                grads[name] = impl.lstm_backward(
                    tokens, lengths, wx.shape[1], wh, *outs, d_h
                )
            for a, b in zip(grads["python"], grads["cython"]):
                assert np.abs(a - b).max() < 1e-11


class TestGraphKernelEquivalence:
    def test_hvg_edges_exact(self):
        rng = np.random.default_rng(2)
        for _ in range(400):
            n = int(rng.integers(1, 120))
            series = rng.integers(1, 7, size=n)
            edge_sets = {
                name: sorted(map(tuple, impl.hvg_edges(series)))
                for name, impl in BACKENDS.items()
            }
            assert edge_sets["python"] == edge_sets["cython"]

    def test_window_codes_exact(self):
        rng = np.random.default_rng(3)
        for _ in range(400):
            n = int(rng.integers(4, 120))
            series = rng.integers(1, 7, size=n)
            codes = {
                name: impl.window_codes(series) for name, impl in BACKENDS.items()
            }
            assert np.array_equal(codes["python"], codes["cython"])


class TestBackendSelection:
    def run_with_env(self, value):
        env = dict(os.environ, SESSIONBENCH_BACKEND=value)
        out = subprocess.run(
            [sys.executable, "-c", "from sessionbench._kernels import BACKEND; print(BACKEND)"],
            capture_output=True,
            text=True,
            env=env,
        )
        assert out.returncode == 0, out.stderr
        return out.stdout.strip()

    def test_force_python(self):
        assert self.run_with_env("python") == "python"

    def test_auto_prefers_cython(self):
        assert self.run_with_env("auto") == "cython"

    def test_module_reports_selected_backend(self):
        assert _kernels.BACKEND in ("python", "cython")
