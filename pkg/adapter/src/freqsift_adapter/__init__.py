"""Reference server for the freqsift-oracle/1 wire protocol.

Wraps any ``predict(samples, sample_rate) -> probability vector`` callable
and serves it over newline-delimited JSON on stdio or TCP, so the analysis
engine can query it like any other black-box classifier."""

__version__ = "0.1.0"

from .adapter import AdapterConfig, serve, serve_stream
