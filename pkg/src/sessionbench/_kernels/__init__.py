"""Kernel backend selection.

The compiled extension is preferred when importable; the pure numpy
backend is the fallback. Set SESSIONBENCH_BACKEND=python (or =cython) to
force one side. Results are deterministic within a backend; tiny
floating-point differences between backends are expected.
"""

from __future__ import annotations

import os

from . import pure

_requested = os.environ.get("SESSIONBENCH_BACKEND", "auto").lower()
if _requested not in ("auto", "cython", "python"):
    raise ImportError(
        f"SESSIONBENCH_BACKEND must be auto, cython or python, got {_requested!r}"
    )

if _requested == "python":
    _impl = pure
    BACKEND = "python"
else:
    try:
        from . import _fast as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        _impl = pure
        BACKEND = "python"

lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward
hvg_edges = _impl.hvg_edges
window_codes = _impl.window_codes


def available_backends() -> dict[str, object]:
    """Importable backend modules keyed by name (for tests and benchmarks)."""
    backends: dict[str, object] = {"python": pure}
    try:
        from . import _fast  # type: ignore[attr-defined]

        backends["cython"] = _fast
    except ImportError:
        pass
    return backends
