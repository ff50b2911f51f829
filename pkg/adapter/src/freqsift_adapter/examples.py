"""Example predictors for the adapter.

``make_band_energy`` is an independent reimplementation of the engine's
builtin band-energy classifier (softmax over spectral band energy
fractions) so the adapter can be checked end-to-end against a known
counterpart. ``make_probe`` derives its output deterministically from the
raw sample bytes, which lets a test prove the float32 decode is bit-exact.
"""

from __future__ import annotations

import zlib

import numpy as np


def make_uniform(n_classes: int):
    """Echo classifier: maximum-entropy output regardless of input."""

    def predict(samples: np.ndarray, sample_rate: int):
        return np.full(n_classes, 1.0 / n_classes)

    return predict


def make_band_energy(
    band_edges_hz,
    temperature: float = 1.0,
    energy_floor: float = 1e-12,
):
    """Softmax over per-band energy fractions of the one-sided spectrum.

    Bands are half-open [lo, hi); the last band includes its upper edge.
    Signals with total band energy at or below ``energy_floor`` produce the
    uniform distribution.
    """
    edges = [float(e) for e in band_edges_hz]
    if len(edges) < 3 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError("band_edges_hz must be >= 3 strictly ascending values")
    n_classes = len(edges) - 1

    def predict(samples: np.ndarray, sample_rate: int):
        spectrum = np.fft.rfft(np.asarray(samples, dtype=np.float64))
        freqs = np.fft.rfftfreq(len(samples), d=1.0 / sample_rate)
        power = np.abs(spectrum) ** 2
        energies = np.empty(n_classes)
        for i in range(n_classes):
            lo, hi = edges[i], edges[i + 1]
            band = (freqs >= lo) & ((freqs < hi) | ((i == n_classes - 1) & (freqs <= hi)))
            energies[i] = power[band].sum()
        total = energies.sum()
        if total <= energy_floor:
            logits = np.zeros(n_classes)
        else:
            logits = (energies / total) / temperature
        z = logits - np.max(logits)
        e = np.exp(z)
        return e / e.sum()

    return predict


def make_probe(n_classes: int = 2):
    """Deterministic function of the exact float32 bytes received, for
    decode-fidelity checks: p0 = 0.1 + 0.8 * (crc32(bytes) / 2^32)."""

    def predict(samples: np.ndarray, sample_rate: int):
        raw = np.asarray(samples, dtype="<f4").tobytes()
        p0 = 0.1 + 0.8 * (zlib.crc32(raw) / 2**32)
        rest = (1.0 - p0) / (n_classes - 1)
        return [p0] + [rest] * (n_classes - 1)

    return predict
