"""Uniform black-box interface to audio classifiers.

Two builtin desk-scale classifier families are provided:

* band-energy: softmax over per-band spectral energy fractions -- cheap,
  closed-form checkable, and deliberately easy to reason about in search
  tests (removing a band's bins moves its energy fraction to zero);
* template: cosine similarity of the log-magnitude spectrum against one
  stored template per class, softmax over similarities -- a structurally
  different oracle family.

Real models plug in through the newline-delimited JSON wire protocol
(see :mod:`freqsift.protocol`); this module only cares that a backend maps
a Signal to a probability vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .errors import BackendError, InvalidInputError, InvalidParameterError
from .signal import Signal, forward_fft

__all__ = [
    "ClassDistribution",
    "ClassifierHandle",
    "BandEnergySpec",
    "TemplateSpec",
    "OracleFailure",
    "classify",
    "classify_batch",
    "top1",
    "shannon_entropy",
    "build_registry",
]

_SUM_TOL = 1e-6


@dataclass(frozen=True)
class ClassDistribution:
    """Probability vector over a classifier's classes."""

    probs: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64).copy()
        labels = tuple(self.labels)
        if probs.ndim != 1 or probs.size < 2:
            raise InvalidParameterError("a distribution needs at least 2 classes")
        if len(labels) != probs.size:
            raise InvalidParameterError("labels and probs must have equal length")
        if np.any(probs < -_SUM_TOL) or np.any(probs > 1 + _SUM_TOL):
            raise InvalidParameterError("probabilities must lie in [0, 1]")
        if abs(float(probs.sum()) - 1.0) > _SUM_TOL:
            raise InvalidParameterError(
                f"probabilities must sum to 1 (got {float(probs.sum()):.8f})"
            )
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "labels", labels)

    @property
    def n_classes(self) -> int:
        return self.probs.size

    def prob_of(self, class_index: int) -> float:
        return float(self.probs[class_index])


def top1(dist: ClassDistribution) -> int:
    """Index of the most probable class; ties break to the lowest index."""
    return int(np.argmax(dist.probs))


def shannon_entropy(dist: ClassDistribution) -> float:
    """Entropy of the distribution in bits (base 2), with 0*log(0) := 0."""
    p = dist.probs[dist.probs > 0]
    return float(-np.sum(p * np.log2(p)))


class Backend(Protocol):
    def predict(self, signal: Signal) -> np.ndarray: ...


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits)
    e = np.exp(z)
    return e / e.sum()


@dataclass(frozen=True)
class BandEnergySpec:
    """Band-energy classifier: class i scores the energy fraction of the
    spectrum falling between band_edges_hz[i] and band_edges_hz[i+1].

    Logits are energy fractions divided by ``temperature``, so the output
    is invariant to signal gain. Signals whose total energy sits below
    ``energy_floor`` (an all-zero signal, or the rounding dust left by an
    all-masked spectrum) yield the uniform distribution instead of letting
    numerical noise pick a winner.
    """

    band_edges_hz: tuple[float, ...]
    temperature: float = 1.0
    energy_floor: float = 1e-12

    def __post_init__(self):
        edges = tuple(float(e) for e in self.band_edges_hz)
        if len(edges) < 3:
            raise InvalidParameterError("need at least 2 bands (3 edges)")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise InvalidParameterError("band edges must be strictly ascending")
        if edges[0] < 0:
            raise InvalidParameterError("band edges must be non-negative")
        if self.temperature <= 0:
            raise InvalidParameterError("temperature must be positive")
        object.__setattr__(self, "band_edges_hz", edges)

    @property
    def n_classes(self) -> int:
        return len(self.band_edges_hz) - 1

    def check_rate(self, sample_rate_hz: int) -> None:
        nyquist = sample_rate_hz / 2.0
        if self.band_edges_hz[-1] > nyquist + 1e-9:
            raise InvalidParameterError(
                f"top band edge {self.band_edges_hz[-1]} Hz exceeds Nyquist {nyquist} Hz"
            )

    def predict(self, signal: Signal) -> np.ndarray:
        spectrum = forward_fft(signal)
        freqs = spectrum.bin_frequencies_hz()
        power = np.abs(spectrum.bins) ** 2
        energies = np.empty(self.n_classes)
        for i in range(self.n_classes):
            lo, hi = self.band_edges_hz[i], self.band_edges_hz[i + 1]
            # half-open bands [lo, hi); the last band includes its top edge
            in_band = (freqs >= lo) & ((freqs < hi) | ((i == self.n_classes - 1) & (freqs <= hi)))
            energies[i] = power[in_band].sum()
        total = energies.sum()
        if total <= self.energy_floor:
            return _softmax(np.zeros(self.n_classes))
        return _softmax((energies / total) / self.temperature)


@dataclass(frozen=True)
class TemplateSpec:
    """Template classifier: cosine similarity of the log-magnitude spectrum
    against one stored template per class, softmax over similarities.

    Sub-``energy_floor`` signals get the uniform distribution, as with the
    band-energy family.
    """

    templates: tuple[tuple[float, ...], ...]
    temperature: float = 0.05
    log_floor: float = 1e-12
    energy_floor: float = 1e-12

    def __post_init__(self):
        if len(self.templates) < 2:
            raise InvalidParameterError("need at least 2 class templates")
        lengths = {len(t) for t in self.templates}
        if len(lengths) != 1:
            raise InvalidParameterError("all templates must have equal length")
        if self.temperature <= 0:
            raise InvalidParameterError("temperature must be positive")
        object.__setattr__(
            self, "templates", tuple(tuple(float(v) for v in t) for t in self.templates)
        )

    @property
    def n_classes(self) -> int:
        return len(self.templates)

    @property
    def n_bins(self) -> int:
        return len(self.templates[0])

    def predict(self, signal: Signal) -> np.ndarray:
        n_fft = 2 * (self.n_bins - 1)
        if len(signal) > n_fft:
            raise InvalidInputError(
                f"template classifier expects signals of at most {n_fft} samples"
            )
        if signal.energy() <= self.energy_floor:
            return _softmax(np.zeros(self.n_classes))
        spectrum = forward_fft(signal, n_fft=n_fft)
        logmag = np.log(np.abs(spectrum.bins) + self.log_floor)
        sims = np.empty(self.n_classes)
        for i, tmpl in enumerate(self.templates):
            t = np.asarray(tmpl)
            denom = np.linalg.norm(logmag) * np.linalg.norm(t)
            sims[i] = float(logmag @ t) / denom if denom > 0 else 0.0
        return _softmax(sims / self.temperature)


@dataclass(frozen=True)
class ClassifierHandle:
    """A classifier as the rest of the toolkit sees it: an id, a label set,
    an expected sample rate, and something that maps signals to probs."""

    id: str
    labels: tuple[str, ...]
    backend: Backend
    expected_sample_rate_hz: int

    def __post_init__(self):
        labels = tuple(self.labels)
        if not labels:
            raise InvalidParameterError("labels must be non-empty")
        if len(set(labels)) != len(labels):
            raise InvalidParameterError("labels must be distinct")
        if self.expected_sample_rate_hz <= 0:
            raise InvalidParameterError("expected_sample_rate_hz must be positive")
        object.__setattr__(self, "labels", labels)

    @property
    def n_classes(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class OracleFailure:
    """Per-element marker used by classify_batch when one signal fails."""

    message: str
    payload: object = None


def classify(handle: ClassifierHandle, signal: Signal) -> ClassDistribution:
    """Ask a classifier for its class distribution over ``signal``.

    Builtin backends are pure functions of the input. External backends
    validate the raw response: a probability vector of the declared length
    whose sum is within 1e-4 of 1 is renormalized, anything else is a
    BackendError carrying the raw payload.
    """
    if signal.sample_rate_hz != handle.expected_sample_rate_hz:
        raise InvalidInputError(
            f"{handle.id}: signal at {signal.sample_rate_hz} Hz, "
            f"model expects {handle.expected_sample_rate_hz} Hz"
        )
    probs = handle.backend.predict(signal)
    return _validated_distribution(handle, probs)


def _validated_distribution(handle: ClassifierHandle, probs) -> ClassDistribution:
    arr = np.asarray(probs, dtype=np.float64)
    if arr.ndim != 1 or arr.size != handle.n_classes:
        raise BackendError(
            f"{handle.id}: expected {handle.n_classes} probabilities, got shape {arr.shape}",
            payload=probs,
        )
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise BackendError(f"{handle.id}: invalid probability values", payload=probs)
    total = float(arr.sum())
    if abs(total - 1.0) > 1e-4:
        raise BackendError(
            f"{handle.id}: probabilities sum to {total:.6f}, outside 1 +/- 1e-4 "
            "(logits instead of probabilities?)",
            payload=probs,
        )
    return ClassDistribution(probs=arr / total, labels=handle.labels)


def classify_batch(
    handle: ClassifierHandle, signals: Sequence[Signal]
) -> list[ClassDistribution | OracleFailure]:
    """Element-wise classify with order preserved.

    A failing element becomes an OracleFailure marker; the batch never
    aborts. External backends pipeline the whole batch over one connection.
    """
    batcher = getattr(handle.backend, "predict_batch", None)
    if batcher is not None:
        raw = batcher([s for s in signals])
        out: list[ClassDistribution | OracleFailure] = []
        for item in raw:
            if isinstance(item, OracleFailure):
                out.append(item)
            else:
                try:
                    out.append(_validated_distribution(handle, item))
                except BackendError as exc:
                    out.append(OracleFailure(str(exc), payload=exc.payload))
        return out
    results: list[ClassDistribution | OracleFailure] = []
    for sig in signals:
        try:
            results.append(classify(handle, sig))
        except (InvalidInputError, BackendError) as exc:
            results.append(OracleFailure(str(exc), payload=getattr(exc, "payload", None)))
    return results


def build_registry(handles: Sequence[ClassifierHandle]) -> dict[str, ClassifierHandle]:
    """Index handles by id, insisting on uniqueness."""
    registry: dict[str, ClassifierHandle] = {}
    for h in handles:
        if h.id in registry:
            raise InvalidParameterError(f"duplicate classifier id {h.id!r}")
        registry[h.id] = h
    return registry
