"""Benchmark toolkit for purchase-intent classification on symbolized clickstreams."""

__version__ = "0.1.0"
