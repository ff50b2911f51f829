"""Oracle-driven discovery of minimal sufficient and delta-complete masks.

A mask is *sufficient* when the reconstruction from its kept bins alone
keeps the classifier's top-1 class and at least ``delta`` times the original
confidence. A mask is *complete* when it is sufficient and reconstruction
from its complement no longer has the top-1 class (the kept bins are both
sufficient and necessary).

Exact minimality is intractable, so the search coarsens the spectrum into
units of ``granularity`` consecutive bins and runs a hierarchical bisection:
starting from the full spectrum, each active band is split in two per level;
with at most 4 active bands every keep/drop combination is tested and the
smallest sufficient union kept, otherwise one greedy half-dropping pass runs
over the bands. Once bands reach single-unit width, a greedy single-unit
elimination sweep (ascending frequency, repeated to fixpoint) establishes
1-minimality: no single kept unit can be removed.

All decisions consume oracle queries from a shared budget; identical
(signal, oracle, budget) inputs produce identical masks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    DegenerateInputError,
    InvalidParameterError,
    SearchNotFoundError,
    UndefinedInverseError,
)
from .oracle import ClassDistribution, ClassifierHandle, classify, top1
from .signal import (
    Fill,
    FrequencyMask,
    Signal,
    ZERO_FILL,
    apply_mask,
    forward_fft,
    inverse_fft,
    n_bins_for,
)

__all__ = [
    "SearchBudget",
    "SufficiencyResult",
    "CompletenessResult",
    "verify_sufficient",
    "find_sufficient",
    "find_complete",
    "inverse_signal",
    "exhaustive_minimal",
    "mask_to_json",
    "mask_from_json",
    "default_granularity",
]

# Slack on the delta gate so the identity reconstruction passes at delta=1.0
# despite FFT round-trip rounding.
GATE_EPS = 1e-12

EXHAUSTIVE_UNIT_LIMIT = 16


@dataclass(frozen=True)
class SearchBudget:
    """Caps on a single search run. ``seed`` feeds the noise fill (when
    used) and is recorded for reproducibility."""

    max_queries: int = 50_000
    max_refine_depth: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.max_queries < 1:
            raise InvalidParameterError("max_queries must be >= 1")
        if self.max_refine_depth < 1:
            raise InvalidParameterError("max_refine_depth must be >= 1")


@dataclass(frozen=True)
class SufficiencyResult:
    mask: FrequencyMask
    target_class: int
    achieved_confidence: float
    original_confidence: float
    delta: float
    oracle_queries: int
    one_minimal: bool
    n_fft: int
    granularity: int


@dataclass(frozen=True)
class CompletenessResult:
    mask: FrequencyMask
    target_class: int
    delta: float
    achieved_confidence: float
    original_confidence: float
    inverse_class: int | None
    inverse_defined: bool
    oracle_queries: int
    one_minimal: bool
    n_fft: int
    granularity: int


def default_granularity(n_bins: int) -> int:
    """Default bins per search unit: coarse enough that the number of units
    stays near 256 regardless of spectrum size."""
    return max(1, math.ceil(n_bins / 256))


def default_confidence_floor(n_classes: int) -> float:
    """Confidence below this is treated as noise: 1.5x the uniform prob."""
    return 1.5 / n_classes


class _BudgetExhausted(Exception):
    pass


class _Evaluator:
    """Shared state for one search run: the fixed spectrum, the oracle,
    the acceptance gates, a query meter and a per-mask memo."""

    def __init__(
        self,
        oracle: ClassifierHandle,
        signal: Signal,
        delta: float,
        budget: SearchBudget,
        n_fft: int,
        granularity: int,
        confidence_floor: float,
        fill: Fill,
    ):
        self.oracle = oracle
        self.signal = signal
        self.delta = delta
        self.budget = budget
        self.n_fft = n_fft
        self.granularity = granularity
        self.floor = confidence_floor
        self.fill = fill
        self.spectrum = forward_fft(signal, n_fft=n_fft)
        self.n_bins = self.spectrum.n_bins
        self.n_units = math.ceil(self.n_bins / granularity)
        self.queries = 0
        self._memo: dict[bytes, ClassDistribution] = {}

        self.original = self._classify(signal)
        self.target = top1(self.original)
        self.sigma = self.original.prob_of(self.target)
        self.best_sufficient: frozenset[int] | None = None

    def _classify(self, signal: Signal) -> ClassDistribution:
        if self.queries >= self.budget.max_queries:
            raise _BudgetExhausted()
        self.queries += 1
        return classify(self.oracle, signal)

    def mask_for_units(self, units) -> FrequencyMask:
        keep = np.zeros(self.n_bins, dtype=bool)
        for u in units:
            keep[u * self.granularity : (u + 1) * self.granularity] = True
        return FrequencyMask(keep, granularity=self.granularity)

    def classify_units(self, units) -> ClassDistribution:
        mask = self.mask_for_units(units)
        key = np.packbits(mask.keep).tobytes()
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        recon = inverse_fft(apply_mask(self.spectrum, mask, fill=self.fill), out_len=len(self.signal))
        dist = self._classify(recon)
        self._memo[key] = dist
        return dist

    def sufficient(self, units) -> bool:
        dist = self.classify_units(units)
        ok = (
            top1(dist) == self.target
            and dist.prob_of(self.target) + GATE_EPS >= self.delta * self.sigma
            and dist.prob_of(self.target) + GATE_EPS >= self.floor
        )
        if ok:
            fs = frozenset(units)
            if self.best_sufficient is None or len(fs) < len(self.best_sufficient):
                self.best_sufficient = fs
        return ok

    def keeps_target(self, units) -> bool:
        """Top-1-only acceptance, used when probing the complement."""
        return top1(self.classify_units(units)) == self.target


def _bisection_shrink(
    universe: tuple[int, ...],
    predicate: Callable[[frozenset[int]], bool],
    max_depth: int,
) -> set[int]:
    """Hierarchical bisection over positions of ``universe``.

    ``predicate`` must hold on the full universe. Returns the unit subset
    selected once every surviving band has single-unit width (before any
    elimination sweep).
    """

    def units_of(bands) -> frozenset[int]:
        return frozenset(
            universe[pos] for lo, hi in bands for pos in range(lo, hi)
        )

    bands: list[tuple[int, int]] = [(0, len(universe))]
    depth = 0
    while depth < max_depth and any(hi - lo > 1 for lo, hi in bands):
        depth += 1
        split: list[tuple[int, int]] = []
        for lo, hi in bands:
            if hi - lo == 1:
                split.append((lo, hi))
            else:
                mid = (lo + hi) // 2
                split.append((lo, mid))
                split.append((mid, hi))
        if len(split) <= 4:
            # Test every keep/drop combination; keep the smallest
            # sufficient union (ties break to the earliest combination).
            best: tuple[int, int] | None = None  # (#units, combo bits)
            best_bands: list[tuple[int, int]] = split
            for bits in range(2 ** len(split)):
                chosen = [b for i, b in enumerate(split) if bits >> i & 1]
                size = sum(hi - lo for lo, hi in chosen)
                if best is not None and (size, bits) >= best:
                    continue
                if predicate(units_of(chosen)):
                    best = (size, bits)
                    best_bands = chosen
            bands = best_bands
        else:
            # One greedy half-dropping pass over the split bands.
            kept: list[tuple[int, int]] = []
            for i, band in enumerate(split):
                trial = kept + split[i + 1 :]
                if not predicate(units_of(trial)):
                    kept.append(band)
            bands = kept
        if not bands:
            return set()
    return set(units_of(bands))


def _eliminate_to_fixpoint(
    units: set[int], predicate: Callable[[frozenset[int]], bool]
) -> set[int]:
    """Greedy single-unit elimination, ascending frequency, repeated until
    a full pass removes nothing."""
    changed = True
    while changed:
        changed = False
        for u in sorted(units):
            trial = frozenset(units - {u})
            if predicate(trial):
                units.discard(u)
                changed = True
    return units


def _prepare(
    oracle: ClassifierHandle,
    signal: Signal,
    delta: float,
    budget: SearchBudget | None,
    n_fft: int | None,
    granularity: int | None,
    confidence_floor: float | None,
    fill: Fill,
) -> _Evaluator:
    if not 0.0 < delta <= 1.0:
        raise InvalidParameterError(f"delta must be in (0, 1], got {delta}")
    budget = budget or SearchBudget()
    if n_fft is None:
        n_fft = len(signal)
    if granularity is None:
        granularity = default_granularity(n_bins_for(n_fft))
    if granularity < 1:
        raise InvalidParameterError("granularity must be >= 1")
    if confidence_floor is None:
        confidence_floor = default_confidence_floor(oracle.n_classes)
    ev = _Evaluator(oracle, signal, delta, budget, n_fft, granularity, confidence_floor, fill)
    if ev.sigma < confidence_floor:
        raise DegenerateInputError(
            f"top-1 confidence {ev.sigma:.4f} is below the noise floor "
            f"{confidence_floor:.4f}; refusing to chase noise"
        )
    return ev


def verify_sufficient(
    oracle: ClassifierHandle,
    signal: Signal,
    mask: FrequencyMask,
    delta: float,
    n_fft: int | None = None,
    fill: Fill = ZERO_FILL,
) -> tuple[bool, ClassDistribution]:
    """Check the sufficiency conditions for ``mask`` with fresh oracle calls.

    True iff the masked reconstruction keeps the original top-1 class with
    at least ``delta`` times the original confidence. Returns the masked
    reconstruction's distribution alongside the verdict.
    """
    if not 0.0 < delta <= 1.0:
        raise InvalidParameterError(f"delta must be in (0, 1], got {delta}")
    if n_fft is None:
        n_fft = len(signal)
    spectrum = forward_fft(signal, n_fft=n_fft)
    if len(mask) != spectrum.n_bins:
        raise InvalidParameterError(
            f"mask has {len(mask)} bins but the spectrum has {spectrum.n_bins}"
        )
    original = classify(oracle, signal)
    target = top1(original)
    sigma = original.prob_of(target)
    recon = inverse_fft(apply_mask(spectrum, mask, fill=fill), out_len=len(signal))
    dist = classify(oracle, recon)
    ok = top1(dist) == target and dist.prob_of(target) + GATE_EPS >= delta * sigma
    return ok, dist


def find_sufficient(
    oracle: ClassifierHandle,
    signal: Signal,
    delta: float,
    budget: SearchBudget | None = None,
    *,
    n_fft: int | None = None,
    granularity: int | None = None,
    confidence_floor: float | None = None,
    fill: Fill = ZERO_FILL,
) -> SufficiencyResult:
    """Search for a 1-minimal sufficient mask using only oracle queries.

    If the budget runs out before anything smaller than the full spectrum
    is confirmed, the full mask is returned with ``one_minimal=False``
    (that is an answer, not an error).
    """
    ev = _prepare(oracle, signal, delta, budget, n_fft, granularity, confidence_floor, fill)
    all_units = tuple(range(ev.n_units))
    one_minimal = False
    try:
        if not ev.sufficient(all_units):
            # The identity reconstruction can only fail on a knife-edge tie
            # (round-trip rounding flipping the argmax); no mask can then
            # satisfy the postcondition against such an unstable target.
            raise DegenerateInputError(
                "the identity reconstruction does not keep the top-1 class; "
                "the classification is numerically unstable at this delta"
            )
        units = _bisection_shrink(all_units, ev.sufficient, ev.budget.max_refine_depth)
        units = _eliminate_to_fixpoint(units, ev.sufficient)
        one_minimal = True
    except _BudgetExhausted:
        units = set(ev.best_sufficient) if ev.best_sufficient is not None else set(all_units)

    mask = ev.mask_for_units(sorted(units))
    try:
        achieved = ev.classify_units(frozenset(units)).prob_of(ev.target)
    except _BudgetExhausted:  # memo miss right at the cap
        achieved = ev.sigma
    return SufficiencyResult(
        mask=mask,
        target_class=ev.target,
        achieved_confidence=achieved,
        original_confidence=ev.sigma,
        delta=ev.delta,
        oracle_queries=ev.queries,
        one_minimal=one_minimal,
        n_fft=ev.n_fft,
        granularity=ev.granularity,
    )


def find_complete(
    oracle: ClassifierHandle,
    signal: Signal,
    delta: float,
    budget: SearchBudget | None = None,
    *,
    n_fft: int | None = None,
    granularity: int | None = None,
    confidence_floor: float | None = None,
    fill: Fill = ZERO_FILL,
) -> CompletenessResult:
    """Search for a mask that is sufficient AND whose complement loses the
    top-1 class (necessity).

    When the complement is empty there is nothing left to classify, so the
    necessity condition is vacuous and ``inverse_defined`` is False.
    Raises SearchNotFoundError if the budget dies before any mask satisfying
    both constraints is confirmed.
    """
    ev = _prepare(oracle, signal, delta, budget, n_fft, granularity, confidence_floor, fill)
    all_units = frozenset(range(ev.n_units))

    def complete(units) -> bool:
        units = frozenset(units)
        if not ev.sufficient(units):
            return False
        comp = all_units - units
        if not comp:
            return True  # necessity is vacuous: nothing left to remove
        return not ev.keeps_target(comp)

    confirmed: set[int] | None = None
    one_minimal = False
    try:
        if ev.sufficient(tuple(all_units)):
            units = _bisection_shrink(
                tuple(range(ev.n_units)), ev.sufficient, ev.budget.max_refine_depth
            )
            units = _eliminate_to_fixpoint(units, ev.sufficient)
        else:
            units = set(all_units)

        while not complete(units):
            comp = tuple(sorted(all_units - units))
            if not comp:
                break
            if ev.keeps_target(comp):
                # The complement still carries the class: absorb one minimal
                # reason for it (a smallest top-1-sufficient chunk of the
                # complement) into the mask and re-check.
                absorb = _bisection_shrink(comp, ev.keeps_target, ev.budget.max_refine_depth)
                absorb = _eliminate_to_fixpoint(absorb, ev.keeps_target)
                units |= absorb if absorb else set(comp)
            else:
                # Complement already flips but sufficiency broke: fall back
                # to the full mask, which is complete by the vacuous rule.
                units = set(all_units)
        if not complete(units):
            # only reachable when even the identity reconstruction fails the
            # delta gate; there is no mask to report
            raise SearchNotFoundError(
                "no mask satisfies both sufficiency and necessity for this input"
            )
        confirmed = set(units)
        units = _eliminate_to_fixpoint(units, complete)
        confirmed = set(units)
        one_minimal = True
    except _BudgetExhausted:
        if confirmed is None:
            raise SearchNotFoundError(
                f"query budget ({ev.budget.max_queries}) exhausted before any "
                "complete mask was confirmed"
            )
        units = confirmed

    mask = ev.mask_for_units(sorted(units))
    comp = all_units - frozenset(units)
    inverse_defined = bool(comp) and not mask.is_full()
    inverse_class: int | None = None
    achieved = ev.sigma
    try:
        achieved = ev.classify_units(frozenset(units)).prob_of(ev.target)
        if inverse_defined:
            inverse_class = top1(ev.classify_units(comp))
    except _BudgetExhausted:
        pass
    return CompletenessResult(
        mask=mask,
        target_class=ev.target,
        delta=ev.delta,
        achieved_confidence=achieved,
        original_confidence=ev.sigma,
        inverse_class=inverse_class,
        inverse_defined=inverse_defined,
        oracle_queries=ev.queries,
        one_minimal=one_minimal,
        n_fft=ev.n_fft,
        granularity=ev.granularity,
    )


def inverse_signal(
    signal: Signal,
    complete: CompletenessResult,
    fill: Fill = ZERO_FILL,
) -> Signal:
    """Reconstruction from the complement of a complete mask: the left-over
    frequencies the classifier did not need."""
    if not complete.inverse_defined:
        raise UndefinedInverseError(
            "the complete mask covers the whole spectrum; no left-over signal exists"
        )
    spectrum = forward_fft(signal, n_fft=complete.n_fft)
    return inverse_fft(
        apply_mask(spectrum, complete.mask.complement(), fill=fill),
        out_len=len(signal),
    )


def exhaustive_minimal(
    oracle: ClassifierHandle,
    signal: Signal,
    delta: float,
    granularity: int,
    *,
    n_fft: int | None = None,
    confidence_floor: float = 0.0,
    fill: Fill = ZERO_FILL,
) -> list[FrequencyMask]:
    """Enumerate ALL minimal sufficient masks at unit granularity.

    Test oracle for the greedy search: only usable when the unit count is
    at most 16 (2^16 oracle calls). Returns masks sorted by popcount then
    bit pattern.
    """
    if not 0.0 < delta <= 1.0:
        raise InvalidParameterError(f"delta must be in (0, 1], got {delta}")
    if n_fft is None:
        n_fft = len(signal)
    n_units = math.ceil(n_bins_for(n_fft) / granularity)
    if n_units > EXHAUSTIVE_UNIT_LIMIT:
        raise InvalidParameterError(
            f"refused: {n_units} units would need 2^{n_units} oracle calls "
            f"(limit {EXHAUSTIVE_UNIT_LIMIT} units)"
        )
    budget = SearchBudget(max_queries=2**n_units + 2)
    ev = _Evaluator(
        oracle, signal, delta, budget, n_fft, granularity, confidence_floor, fill
    )

    sufficient_bits: list[int] = []
    for bits in range(2**n_units):
        units = frozenset(u for u in range(n_units) if bits >> u & 1)
        if ev.sufficient(units):
            sufficient_bits.append(bits)

    sufficient_bits.sort(key=lambda b: (bin(b).count("1"), b))
    minimal: list[int] = []
    for bits in sufficient_bits:
        if not any(m & bits == m for m in minimal):
            minimal.append(bits)
    return [
        ev.mask_for_units([u for u in range(n_units) if bits >> u & 1])
        for bits in minimal
    ]


# -- mask serialization --------------------------------------------------------


def mask_to_json(mask: FrequencyMask) -> dict:
    """Run-length encoding: runs alternate dropped/kept, starting with the
    length of the leading dropped run (0 if the mask starts kept)."""
    runs: list[int] = []
    current = False  # encoding starts with a (possibly empty) run of zeros
    count = 0
    for bit in mask.keep:
        if bool(bit) == current:
            count += 1
        else:
            runs.append(count)
            current = bool(bit)
            count = 1
    runs.append(count)
    return {"n_bins": len(mask), "granularity": mask.granularity, "rle": runs}


def mask_from_json(payload: dict) -> FrequencyMask:
    n_bins = int(payload["n_bins"])
    runs = [int(r) for r in payload["rle"]]
    if sum(runs) != n_bins:
        raise InvalidParameterError(
            f"RLE runs sum to {sum(runs)}, expected n_bins={n_bins}"
        )
    keep = np.zeros(n_bins, dtype=bool)
    pos = 0
    value = False
    for run in runs:
        keep[pos : pos + run] = value
        pos += run
        value = not value
    return FrequencyMask(keep, granularity=int(payload.get("granularity", 1)))
