"""Time/frequency representations, FFT round trips and spectral masking.

Every other module manipulates the three value types defined here:

* ``Signal`` -- mono time-domain samples plus a sample rate.
* ``Spectrum`` -- one-sided complex FFT coefficients (real-input transform,
  so a bin implicitly stands for itself and its conjugate mirror).
* ``FrequencyMask`` -- a per-bin keep/drop vector, optionally grouped into
  units of ``granularity`` bins for coarse-grained search.

All types are immutable values after construction (their numpy buffers are
frozen), and all operations are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .errors import InvalidParameterError, UnsupportedConfigurationError

__all__ = [
    "Signal",
    "Spectrum",
    "FrequencyMask",
    "Fill",
    "forward_fft",
    "inverse_fft",
    "apply_mask",
    "reconstruct",
    "stft",
    "istft",
    "n_bins_for",
]


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype)
    if arr.ndim != 1:
        raise InvalidParameterError(f"expected a 1-d array, got shape {arr.shape}")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


def n_bins_for(n_fft: int) -> int:
    """Number of one-sided bins for a real transform of length ``n_fft``."""
    return n_fft // 2 + 1


@dataclass(frozen=True)
class Signal:
    """Mono audio samples with their sample rate.

    Samples are dimensionless amplitudes, nominally in [-1, 1]; values
    outside that range are legal (intermediate sums, transplants) and only
    clipped at WAV-write time.
    """

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = _frozen_array(self.samples, np.float64)
        if samples.size < 1:
            raise InvalidParameterError("signal must contain at least one sample")
        if not np.all(np.isfinite(samples)):
            raise InvalidParameterError("signal samples must all be finite")
        if int(self.sample_rate_hz) <= 0:
            raise InvalidParameterError("sample_rate_hz must be positive")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def energy(self) -> float:
        return float(np.sum(self.samples**2))


@dataclass(frozen=True)
class Spectrum:
    """One-sided complex spectrum of a real signal.

    ``bins`` has length ``n_fft // 2 + 1``. The DC bin (and the Nyquist bin
    for even ``n_fft``) of a real-input transform is real-valued.
    """

    bins: np.ndarray
    n_fft: int
    sample_rate_hz: int

    def __post_init__(self):
        bins = _frozen_array(self.bins, np.complex128)
        n_fft = int(self.n_fft)
        if n_fft < 2:
            raise InvalidParameterError("n_fft must be >= 2")
        if bins.size != n_bins_for(n_fft):
            raise InvalidParameterError(
                f"expected {n_bins_for(n_fft)} bins for n_fft={n_fft}, got {bins.size}"
            )
        if int(self.sample_rate_hz) <= 0:
            raise InvalidParameterError("sample_rate_hz must be positive")
        object.__setattr__(self, "bins", bins)
        object.__setattr__(self, "n_fft", n_fft)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    @property
    def n_bins(self) -> int:
        return self.bins.size

    def bin_frequencies_hz(self) -> np.ndarray:
        return np.fft.rfftfreq(self.n_fft, d=1.0 / self.sample_rate_hz)

    def energy(self) -> float:
        """Time-domain energy implied by the one-sided bins (Parseval)."""
        return _one_sided_energy(self.bins, self.n_fft)


def _one_sided_energy(bins: np.ndarray, n_fft: int) -> float:
    # Parseval with one-sided doubling: interior bins stand for a conjugate
    # pair, DC (and Nyquist when n_fft is even) stand only for themselves.
    mags = np.abs(bins) ** 2
    weights = np.full(bins.size, 2.0)
    weights[0] = 1.0
    if n_fft % 2 == 0:
        weights[-1] = 1.0
    return float(np.sum(weights * mags) / n_fft)


@dataclass(frozen=True)
class FrequencyMask:
    """Binary keep/drop vector over spectrum bins.

    ``granularity`` records how many consecutive bins formed one decision
    unit when the mask was produced; it does not constrain the bit pattern.
    """

    keep: np.ndarray
    granularity: int = 1

    def __post_init__(self):
        keep = np.asarray(self.keep)
        if keep.ndim != 1:
            raise InvalidParameterError("mask must be a 1-d bit vector")
        keep = (keep != 0).copy()
        keep.flags.writeable = False
        if int(self.granularity) < 1:
            raise InvalidParameterError("granularity must be >= 1")
        object.__setattr__(self, "keep", keep)
        object.__setattr__(self, "granularity", int(self.granularity))

    def __len__(self) -> int:
        return self.keep.size

    def popcount(self) -> int:
        return int(np.count_nonzero(self.keep))

    def complement(self) -> "FrequencyMask":
        return FrequencyMask(~self.keep, granularity=self.granularity)

    def is_full(self) -> bool:
        return bool(np.all(self.keep))

    def is_empty(self) -> bool:
        return not np.any(self.keep)

    def is_subset_of(self, other: "FrequencyMask") -> bool:
        return bool(np.all(other.keep[self.keep]))

    @staticmethod
    def full(n_bins: int, granularity: int = 1) -> "FrequencyMask":
        return FrequencyMask(np.ones(n_bins, dtype=bool), granularity=granularity)

    @staticmethod
    def empty(n_bins: int, granularity: int = 1) -> "FrequencyMask":
        return FrequencyMask(np.zeros(n_bins, dtype=bool), granularity=granularity)


@dataclass(frozen=True)
class Fill:
    """Policy for bins dropped by a mask: zero them, hold a constant, or
    draw reproducible complex noise from ``seed``."""

    kind: Literal["zero", "constant", "noise"] = "zero"
    value: float = 0.0
    seed: int = 0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "noise"):
            raise InvalidParameterError(f"unknown fill kind {self.kind!r}")


ZERO_FILL = Fill("zero")


def forward_fft(signal: Signal, n_fft: int | None = None) -> Spectrum:
    """One-sided FFT of ``signal``, zero-padded to ``n_fft``.

    ``n_fft`` defaults to the signal length and must be >= it.
    """
    if n_fft is None:
        n_fft = len(signal)
    n_fft = int(n_fft)
    if n_fft < 2:
        raise InvalidParameterError("n_fft must be >= 2")
    if n_fft < len(signal):
        raise InvalidParameterError(
            f"n_fft={n_fft} is smaller than the signal ({len(signal)} samples)"
        )
    bins = np.fft.rfft(signal.samples, n=n_fft)
    return Spectrum(bins=bins, n_fft=n_fft, sample_rate_hz=signal.sample_rate_hz)


def inverse_fft(spectrum: Spectrum, out_len: int | None = None) -> Signal:
    """Inverse one-sided FFT, truncated to ``out_len`` samples."""
    if out_len is None:
        out_len = spectrum.n_fft
    out_len = int(out_len)
    if out_len < 1:
        raise InvalidParameterError("out_len must be >= 1")
    if out_len > spectrum.n_fft:
        raise InvalidParameterError(
            f"out_len={out_len} exceeds n_fft={spectrum.n_fft}"
        )
    samples = np.fft.irfft(spectrum.bins, n=spectrum.n_fft)[:out_len]
    return Signal(samples=samples, sample_rate_hz=spectrum.sample_rate_hz)


def apply_mask(spectrum: Spectrum, mask: FrequencyMask, fill: Fill = ZERO_FILL) -> Spectrum:
    """Keep bins where ``mask`` is set; replace the rest per ``fill``.

    Deterministic given (mask, fill): the noise fill is seeded. Because the
    spectrum is one-sided, dropping a bin implicitly drops its conjugate
    mirror, so reconstructions stay real-valued.
    """
    if len(mask) != spectrum.n_bins:
        raise InvalidParameterError(
            f"mask length {len(mask)} != spectrum bin count {spectrum.n_bins}"
        )
    bins = np.array(spectrum.bins)
    dropped = ~mask.keep
    if fill.kind == "zero":
        bins[dropped] = 0.0
    elif fill.kind == "constant":
        bins[dropped] = complex(fill.value, 0.0)
    else:
        rng = np.random.default_rng(fill.seed)
        noise = rng.standard_normal(spectrum.n_bins) + 1j * rng.standard_normal(spectrum.n_bins)
        bins[dropped] = fill.scale * noise[dropped]
    return Spectrum(bins=bins, n_fft=spectrum.n_fft, sample_rate_hz=spectrum.sample_rate_hz)


def reconstruct(
    signal: Signal,
    mask: FrequencyMask,
    n_fft: int | None = None,
    fill: Fill = ZERO_FILL,
) -> Signal:
    """Mask ``signal`` in the frequency domain and return the time-domain
    reconstruction at the original length."""
    spectrum = forward_fft(signal, n_fft=n_fft)
    return inverse_fft(apply_mask(spectrum, mask, fill=fill), out_len=len(signal))


# -- STFT --------------------------------------------------------------------
#
# Provided for long signals where a frame-wise identical mask is applied;
# the search operates on the whole-signal FFT by default.

_WINDOWS = ("rect", "hann")


def _window(name: str, win_len: int) -> np.ndarray:
    if name == "rect":
        return np.ones(win_len)
    if name == "hann":
        # Periodic Hann: sums to a constant under 50% overlap.
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(win_len) / win_len)
    raise InvalidParameterError(f"window must be one of {_WINDOWS}, got {name!r}")


def _stft_pad(window: str, hop: int) -> int:
    # A periodic Hann is zero at its first sample, so the very first sample
    # of the signal must not sit at a window edge; one hop of leading zeros
    # guarantees full window coverage for every real sample.
    return hop if window == "hann" else 0


def stft(
    signal: Signal,
    win_len: int,
    hop: int,
    window: str = "hann",
) -> list[Spectrum]:
    """Short-time transform: frames of ``win_len`` samples every ``hop``.

    Windowed analysis prepends one hop of zeros (removed again by
    :func:`istft`); the tail is zero-padded so every sample lands in at
    least one frame.
    """
    win_len = int(win_len)
    hop = int(hop)
    if win_len < 2:
        raise InvalidParameterError("win_len must be >= 2")
    if not 0 < hop <= win_len:
        raise InvalidParameterError("hop must satisfy 0 < hop <= win_len")
    w = _window(window, win_len)
    x = signal.samples
    pad = _stft_pad(window, hop)
    if pad:
        x = np.concatenate([np.zeros(pad), x])
    n_frames = max(1, int(np.ceil(max(len(x) - win_len, 0) / hop)) + 1)
    frames = []
    for i in range(n_frames):
        start = i * hop
        chunk = x[start : start + win_len]
        if chunk.size < win_len:
            chunk = np.pad(chunk, (0, win_len - chunk.size))
        frames.append(
            Spectrum(
                bins=np.fft.rfft(w * chunk),
                n_fft=win_len,
                sample_rate_hz=signal.sample_rate_hz,
            )
        )
    return frames


def istft(
    frames: Sequence[Spectrum],
    hop: int,
    window: str = "hann",
    out_len: int | None = None,
) -> Signal:
    """Overlap-add inverse of :func:`stft`.

    Only configurations with full overlap-add coverage are accepted for
    reconstruction: rect with hop == win_len, or hann with hop dividing
    win_len (hop < win_len).
    """
    if not frames:
        raise InvalidParameterError("istft requires at least one frame")
    hop = int(hop)
    win_len = frames[0].n_fft
    if any(f.n_fft != win_len for f in frames):
        raise InvalidParameterError("all frames must share n_fft")
    if window == "rect":
        cola = hop == win_len
    else:
        cola = hop < win_len and win_len % hop == 0
    if not cola:
        raise UnsupportedConfigurationError(
            f"window={window!r} with hop={hop}, win_len={win_len} does not satisfy "
            "constant overlap-add; reconstruction would be lossy"
        )
    w = _window(window, win_len)
    total = (len(frames) - 1) * hop + win_len
    acc = np.zeros(total)
    norm = np.zeros(total)
    for i, frame in enumerate(frames):
        start = i * hop
        acc[start : start + win_len] += w * np.fft.irfft(frame.bins, n=win_len)
        norm[start : start + win_len] += w * w
    good = norm > 1e-12
    acc[good] /= norm[good]
    acc = acc[_stft_pad(window, hop) :]
    if out_len is not None:
        acc = acc[: int(out_len)]
    return Signal(samples=acc, sample_rate_hz=frames[0].sample_rate_hz)
