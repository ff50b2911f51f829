"""Global composite class signatures and cross-label transplants.

A composite signature for class c is the mean of as many same-class
sufficient signals as a greedy pass can stack while the running mean still
classifies to c. The fraction of candidates that made it in (the degree of
compositionality, in (0, 1]) says how "averageable" the class evidence is.

A transplant overlays a class-c' composite onto a class-c signal -- with no
other alteration in "add" mode -- and asks whether the label flips to c'.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, InvalidParameterError, SearchNotFoundError
from .oracle import ClassDistribution, ClassifierHandle, classify, top1
from .signal import Signal, Spectrum, forward_fft, inverse_fft

__all__ = [
    "CompositeSignature",
    "TransplantResult",
    "compose_global",
    "cross_label_transplant",
]


@dataclass(frozen=True)
class CompositeSignature:
    signal: Signal
    class_index: int
    member_ids: tuple[str, ...]
    candidates_considered: int
    degree: float


@dataclass(frozen=True)
class TransplantResult:
    flipped: bool
    distribution: ClassDistribution
    signal: Signal
    mode: str


def _padded_to(samples: np.ndarray, length: int) -> np.ndarray:
    if samples.size == length:
        return samples
    return np.pad(samples, (0, length - samples.size))


def compose_global(
    oracle: ClassifierHandle,
    signals: Sequence[Signal],
    class_index: int,
    ids: Sequence[str] | None = None,
) -> CompositeSignature:
    """Greedily build the composite signature for ``class_index``.

    Candidates are sorted by descending individual confidence in the class
    (ties keep input order); one that does not classify to the class on its
    own, or whose inclusion makes the running mean stop classifying to it,
    is rejected but still counts toward the degree's denominator. Shorter
    candidates are zero-padded to the longest.
    """
    if not signals:
        raise InvalidParameterError("compose_global needs at least one signal")
    if ids is None:
        ids = [f"m{i:04d}" for i in range(len(signals))]
    if len(ids) != len(signals):
        raise InvalidParameterError("ids and signals must have equal length")
    rates = {s.sample_rate_hz for s in signals}
    if len(rates) != 1:
        raise InvalidInputError(f"signals mix sample rates: {sorted(rates)}")
    rate = signals[0].sample_rate_hz
    length = max(len(s) for s in signals)
    padded = [_padded_to(s.samples, length) for s in signals]

    scored = []
    for i, arr in enumerate(padded):
        dist = classify(oracle, Signal(arr, rate))
        scored.append((i, dist.prob_of(class_index), top1(dist) == class_index))
    order = sorted(scored, key=lambda item: (-item[1], item[0]))

    members: list[str] = []
    running = np.zeros(length)
    for i, _conf, eligible in order:
        if not eligible:
            continue
        trial = (running + padded[i]) / (len(members) + 1)
        if top1(classify(oracle, Signal(trial, rate))) == class_index:
            running = running + padded[i]
            members.append(str(ids[i]))
    if not members:
        raise SearchNotFoundError(
            f"no candidate classifies to class {class_index}; nothing to compose"
        )

    composite = Signal(running / len(members), rate)
    final = classify(oracle, composite)
    if top1(final) != class_index:
        # cannot happen for a deterministic oracle: the accepted mean was
        # classified to the class the moment its last member joined
        raise SearchNotFoundError("composite no longer classifies to its class on recheck")
    return CompositeSignature(
        signal=composite,
        class_index=class_index,
        member_ids=tuple(members),
        candidates_considered=len(signals),
        degree=len(members) / len(signals),
    )


def cross_label_transplant(
    oracle: ClassifierHandle,
    composite: CompositeSignature,
    target: Signal,
    mode: str = "add",
) -> TransplantResult:
    """Overlay a composite signature for class c' onto a signal of another
    class and report whether the label flips to c'.

    ``add`` sums the waveforms sample-wise (peak-normalized only if the sum
    leaves [-1, 1]); ``replace`` overwrites the target's spectrum bins with
    the composite's nonzero bins.
    """
    if mode not in ("add", "replace"):
        raise InvalidParameterError(f"mode must be add|replace, got {mode}")
    comp_sig = composite.signal
    if comp_sig.sample_rate_hz != target.sample_rate_hz:
        raise InvalidInputError(
            f"sample rates differ: composite {comp_sig.sample_rate_hz} Hz, "
            f"target {target.sample_rate_hz} Hz"
        )
    if top1(classify(oracle, target)) == composite.class_index:
        raise InvalidInputError(
            "target already classifies to the composite's class; transplant is vacuous"
        )

    length = max(len(comp_sig), len(target))
    if mode == "add":
        summed = _padded_to(target.samples, length) + _padded_to(comp_sig.samples, length)
        peak = float(np.max(np.abs(summed))) if summed.size else 0.0
        if peak > 1.0:
            summed = summed / peak
        result = Signal(summed, target.sample_rate_hz)
    else:
        tgt_spec = forward_fft(Signal(_padded_to(target.samples, length), target.sample_rate_hz))
        comp_spec = forward_fft(Signal(_padded_to(comp_sig.samples, length), comp_sig.sample_rate_hz))
        bins = np.array(tgt_spec.bins)
        nonzero = comp_spec.bins != 0
        bins[nonzero] = comp_spec.bins[nonzero]
        overlaid = Spectrum(bins=bins, n_fft=tgt_spec.n_fft, sample_rate_hz=tgt_spec.sample_rate_hz)
        result = inverse_fft(overlaid, out_len=len(target))

    dist = classify(oracle, result)
    return TransplantResult(
        flipped=top1(dist) == composite.class_index,
        distribution=dist,
        signal=result,
        mode=mode,
    )
