"""Cross-model transferability of subset signals.

A subset signal extracted on a source model is *transferable* to a model
set when every model assigns it the same class AND every model's output
entropy stays below ``epsilon * log2(n)`` (far enough from a flat, clueless
distribution). The per-model fractions of those two gates are the alpha
and beta goodness scores; strict transferability is alpha = beta = 1.

``transfer_matrix`` aggregates alpha over a signal corpus into the familiar
rows-are-sources / columns-are-targets grid with a per-source average
column, which is where "flat-earther" models show up: their row and column
averages sit below everyone else's.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import stdtr

from .errors import (
    DegenerateInputError,
    IncompatibleModelsError,
    InvalidInputError,
    InvalidParameterError,
    SearchNotFoundError,
)
from .oracle import ClassDistribution, ClassifierHandle, classify, shannon_entropy, top1
from .search import SearchBudget, find_complete, find_sufficient
from .signal import Signal, reconstruct

__all__ = [
    "TransferVerdict",
    "TransferReport",
    "TransferMatrix",
    "TTestResult",
    "assess_transfer",
    "report_from_distributions",
    "transfer_matrix",
    "paired_t_test",
]

ENTROPY_TOL = 1e-12


@dataclass(frozen=True)
class TransferVerdict:
    model_id: str
    predicted_class: int
    class_match: bool
    entropy_bits: float
    entropy_ok: bool


@dataclass(frozen=True)
class TransferReport:
    source_model: str
    signal_id: str
    target_class: int
    epsilon: float
    verdicts: tuple[TransferVerdict, ...]
    alpha: float
    beta: float
    transferable: bool


@dataclass(frozen=True)
class TransferMatrix:
    """rows = source models, cols = target models; diagonal undefined."""

    model_ids: tuple[str, ...]
    cells: np.ndarray  # mean per-target class-match rate, NaN on the diagonal
    counts: np.ndarray  # signals contributing to each cell
    row_avg: np.ndarray  # mean of each row's off-diagonal cells
    excluded: tuple[int, ...]  # corpus items skipped per source (extraction failed)


def _check_epsilon(epsilon: float) -> None:
    # epsilon = 0 would reject every distribution, so it is outside the domain
    if not 0.0 < epsilon <= 1.0:
        raise InvalidParameterError(f"epsilon must be in (0, 1], got {epsilon}")


def report_from_distributions(
    source_id: str,
    signal_id: str,
    target_class: int,
    epsilon: float,
    model_ids: Sequence[str],
    distributions: Sequence[ClassDistribution],
    n_classes: int,
) -> TransferReport:
    """Pure transferability algebra over already-obtained distributions."""
    _check_epsilon(epsilon)
    if len(model_ids) != len(distributions) or not model_ids:
        raise InvalidParameterError("need one distribution per model id")
    max_entropy = math.log2(n_classes)
    verdicts = []
    for mid, dist in zip(model_ids, distributions):
        predicted = top1(dist)
        entropy = shannon_entropy(dist)
        verdicts.append(
            TransferVerdict(
                model_id=mid,
                predicted_class=predicted,
                class_match=predicted == target_class,
                entropy_bits=entropy,
                entropy_ok=entropy <= epsilon * max_entropy + ENTROPY_TOL,
            )
        )
    n = len(verdicts)
    alpha = sum(v.class_match for v in verdicts) / n
    beta = sum(v.entropy_ok for v in verdicts) / n
    return TransferReport(
        source_model=source_id,
        signal_id=signal_id,
        target_class=target_class,
        epsilon=epsilon,
        verdicts=tuple(verdicts),
        alpha=alpha,
        beta=beta,
        transferable=(alpha == 1.0 and beta == 1.0),
    )


def assess_transfer(
    signal: Signal,
    target_class: int,
    source: ClassifierHandle,
    targets: Sequence[ClassifierHandle],
    epsilon: float,
    signal_id: str = "",
) -> TransferReport:
    """Classify ``signal`` on every target model and score transferability
    of ``target_class`` (the class it had on the source model)."""
    _check_epsilon(epsilon)
    if not targets:
        raise InvalidParameterError("need at least one target model")
    for t in targets:
        if t.labels != source.labels:
            raise IncompatibleModelsError(
                f"model {t.id!r} does not share the label set of {source.id!r}"
            )
    dists = [classify(t, signal) for t in targets]
    return report_from_distributions(
        source.id,
        signal_id,
        target_class,
        epsilon,
        [t.id for t in targets],
        dists,
        n_classes=source.n_classes,
    )


def _extract_subset(model, sig, delta, subset_kind, budget, n_fft, granularity, floor):
    finder = find_sufficient if subset_kind == "sufficient" else find_complete
    result = finder(
        model, sig, delta, budget,
        n_fft=n_fft, granularity=granularity, confidence_floor=floor,
    )
    subset = reconstruct(sig, result.mask, n_fft=result.n_fft)
    return result, subset


def transfer_matrix(
    models: Sequence[ClassifierHandle],
    corpus: Sequence[Signal] | Sequence[tuple[str, Signal]],
    delta: float,
    epsilon: float,
    subset_kind: str = "sufficient",
    *,
    budget: SearchBudget | None = None,
    n_fft: int | None = None,
    granularity: int | None = None,
    confidence_floor: float | None = None,
    workers: int = 1,
) -> tuple[TransferMatrix, list[dict]]:
    """Build the full source-by-target class-match matrix over a corpus.

    For every source model and corpus signal, the subset signal (sufficient
    or complete, per ``subset_kind``) is extracted on the source, then each
    target classifies it once; cells average the 0/1 class matches. Signals
    whose extraction fails on a source are excluded from that row and
    counted in ``excluded``.

    Returns the matrix plus one JSON-ready verdict record per
    (source, signal) with per-target detail.
    """
    _check_epsilon(epsilon)
    if len(models) < 2:
        raise InvalidParameterError("transfer matrix needs at least 2 models")
    if not corpus:
        raise InvalidParameterError("corpus must be non-empty")
    if subset_kind not in ("sufficient", "complete"):
        raise InvalidParameterError(f"subset_kind must be sufficient|complete, got {subset_kind}")
    labels = models[0].labels
    for m in models[1:]:
        if m.labels != labels:
            raise IncompatibleModelsError(
                f"model {m.id!r} does not share the label set of {models[0].id!r}"
            )

    named: list[tuple[str, Signal]] = []
    for i, item in enumerate(corpus):
        if isinstance(item, Signal):
            named.append((f"sig{i:04d}", item))
        else:
            named.append((str(item[0]), item[1]))

    n = len(models)
    match_sum = np.zeros((n, n))
    counts = np.zeros((n, n), dtype=np.int64)
    excluded = [0] * n
    records: list[dict] = []

    def run_cell(si: int, item: tuple[str, Signal]):
        sig_id, sig = item
        source = models[si]
        try:
            result, subset = _extract_subset(
                source, sig, delta, subset_kind, budget, n_fft, granularity, confidence_floor
            )
        except (DegenerateInputError, SearchNotFoundError, InvalidInputError) as exc:
            return si, sig_id, None, str(exc)
        report = assess_transfer(
            subset,
            result.target_class,
            source,
            [m for m in models if m.id != source.id],
            epsilon,
            signal_id=sig_id,
        )
        return si, sig_id, (result, report), None

    tasks = [(si, item) for si in range(n) for item in named]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(lambda t: run_cell(*t), tasks))
    else:
        outcomes = [run_cell(*t) for t in tasks]

    for si, sig_id, payload, error in outcomes:
        source = models[si]
        if payload is None:
            excluded[si] += 1
            records.append(
                {
                    "source": source.id,
                    "signal": sig_id,
                    "subset_kind": subset_kind,
                    "error": error,
                }
            )
            continue
        result, report = payload
        verdict_by_id = {v.model_id: v for v in report.verdicts}
        for ti, tgt in enumerate(models):
            if ti == si:
                continue
            v = verdict_by_id[tgt.id]
            match_sum[si, ti] += 1.0 if v.class_match else 0.0
            counts[si, ti] += 1
        records.append(
            {
                "source": source.id,
                "signal": sig_id,
                "subset_kind": subset_kind,
                "target_class": report.target_class,
                "target_label": source.labels[report.target_class],
                "mask_popcount": result.mask.popcount(),
                "mask_bins": len(result.mask),
                "oracle_queries": result.oracle_queries,
                "alpha": report.alpha,
                "beta": report.beta,
                "transferable": report.transferable,
                "verdicts": [
                    {
                        "model": v.model_id,
                        "predicted_class": v.predicted_class,
                        "class_match": v.class_match,
                        "entropy_bits": v.entropy_bits,
                        "entropy_ok": v.entropy_ok,
                    }
                    for v in report.verdicts
                ],
            }
        )

    cells = np.full((n, n), np.nan)
    nonzero = counts > 0
    cells[nonzero] = match_sum[nonzero] / counts[nonzero]
    row_avg = np.array(
        [
            np.nanmean(np.delete(cells[i], i)) if np.any(counts[i] > 0) else np.nan
            for i in range(n)
        ]
    )
    matrix = TransferMatrix(
        model_ids=tuple(m.id for m in models),
        cells=cells,
        counts=counts,
        row_avg=row_avg,
        excluded=tuple(excluded),
    )
    return matrix, records


@dataclass(frozen=True)
class TTestResult:
    statistic: float
    p_value: float
    dof: int


def paired_t_test(x: Sequence[float], y: Sequence[float]) -> TTestResult:
    """Two-sided paired t test on equal-length samples.

    The p-value comes from the Student t CDF with len(x) - 1 degrees of
    freedom. Zero variance of the differences (including x == y) is a
    degenerate input, not a statistic.
    """
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise InvalidParameterError("x and y must be 1-d and equally long")
    if xa.size < 2:
        raise InvalidParameterError("need at least 2 pairs")
    d = xa - ya
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        raise DegenerateInputError("differences have zero variance")
    n = d.size
    t = float(np.mean(d) / (sd / math.sqrt(n)))
    p = 2.0 * float(stdtr(n - 1, -abs(t)))
    return TTestResult(statistic=t, p_value=min(1.0, p), dof=n - 1)
