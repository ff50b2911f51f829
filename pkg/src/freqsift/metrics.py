"""Analytic instruments: PSD, spectral entropy, STOI, Levenshtein,
Mann-Whitney U.

These quantify what the search found -- how concentrated a subset signal's
spectrum is, how intelligible a reconstruction remains, how far apart the
real/fake populations sit -- without any oracle involvement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import resample_poly

from .errors import (
    DegenerateInputError,
    InvalidParameterError,
    TooShortError,
    UndefinedEntropyError,
)
from .signal import Signal

__all__ = [
    "PsdEstimate",
    "MannWhitneyResult",
    "psd",
    "spectral_entropy",
    "stoi",
    "levenshtein",
    "levenshtein_ratio",
    "mann_whitney_u",
]

_EPS = np.finfo(np.float64).eps


# -- power spectral density ----------------------------------------------------


@dataclass(frozen=True)
class PsdEstimate:
    freqs_hz: np.ndarray
    power: np.ndarray  # power per Hz, one-sided
    method: str
    window: str
    nperseg: int
    overlap: int


def _psd_window(name: str, n: int) -> np.ndarray:
    if name == "rect":
        return np.ones(n)
    if name == "hann":
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)
    raise InvalidParameterError(f"window must be rect|hann, got {name!r}")


def _segment_psd(seg: np.ndarray, w: np.ndarray, fs: float) -> np.ndarray:
    spec = np.abs(np.fft.rfft(w * seg)) ** 2 / (fs * float(np.sum(w * w)))
    spec[1:] *= 2.0
    if seg.size % 2 == 0:
        spec[-1] /= 2.0  # Nyquist bin has no mirror
    return spec


def psd(
    signal: Signal,
    method: str = "periodogram",
    window: str | None = None,
    nperseg: int | None = None,
    overlap: int | None = None,
) -> PsdEstimate:
    """One-sided PSD estimate.

    periodogram: squared whole-signal FFT over (fs * n), interior bins
    doubled. welch: mean of windowed, overlapping segment periodograms with
    window-power normalization (default hann, 50% overlap).
    """
    x = signal.samples
    fs = float(signal.sample_rate_hz)
    if method == "periodogram":
        window = window or "rect"
        nperseg = x.size if nperseg is None else int(nperseg)
        if nperseg != x.size:
            raise InvalidParameterError("periodogram uses the whole signal; leave nperseg unset")
        w = _psd_window(window, x.size)
        power = _segment_psd(x, w, fs)
        freqs = np.fft.rfftfreq(x.size, d=1.0 / fs)
        return PsdEstimate(freqs, power, "periodogram", window, x.size, 0)
    if method != "welch":
        raise InvalidParameterError(f"method must be periodogram|welch, got {method!r}")

    window = window or "hann"
    nperseg = int(nperseg) if nperseg is not None else min(256, x.size)
    if nperseg > x.size:
        raise InvalidParameterError(f"nperseg={nperseg} exceeds signal length {x.size}")
    if nperseg < 2:
        raise InvalidParameterError("nperseg must be >= 2")
    overlap = nperseg // 2 if overlap is None else int(overlap)
    if not 0 <= overlap < nperseg:
        raise InvalidParameterError("overlap must satisfy 0 <= overlap < nperseg")
    step = nperseg - overlap
    w = _psd_window(window, nperseg)
    segments = [
        _segment_psd(x[start : start + nperseg], w, fs)
        for start in range(0, x.size - nperseg + 1, step)
    ]
    power = np.mean(segments, axis=0)
    freqs = np.fft.rfftfreq(nperseg, d=1.0 / fs)
    return PsdEstimate(freqs, power, "welch", window, nperseg, overlap)


def spectral_entropy(
    signal: Signal,
    normalized: bool = False,
    *,
    method: str = "periodogram",
    window: str | None = None,
    nperseg: int | None = None,
    overlap: int | None = None,
) -> float:
    """Shannon entropy (bits) of the PSD viewed as a probability
    distribution over frequency bins; ``normalized`` divides by the maximum
    log2(#bins), mapping to [0, 1]."""
    estimate = psd(signal, method=method, window=window, nperseg=nperseg, overlap=overlap)
    total = float(np.sum(estimate.power))
    if total <= 0.0:
        raise UndefinedEntropyError("zero-energy signal has no spectral distribution")
    p = estimate.power / total
    p = p[p > 0]
    entropy = float(-np.sum(p * np.log2(p)))
    if normalized:
        entropy /= math.log2(estimate.power.size)
    return entropy


# -- short-time objective intelligibility ---------------------------------------
#
# Fixed analysis configuration: 10 kHz internal rate, 25.6 ms hann frames at
# 50% overlap (256 samples, 512-point FFT), 15 one-third-octave bands from
# 150 Hz, 384 ms comparison segments (30 frames), silent frames more than
# 40 dB below the loudest removed, and a -15 dB signal-to-distortion bound
# on the normalized degraded envelope before correlation.

_STOI_FS = 10_000
_STOI_FRAME = 256
_STOI_HOP = 128
_STOI_NFFT = 512
_STOI_BANDS = 15
_STOI_MIN_FREQ = 150.0
_STOI_SEG_FRAMES = 30
_STOI_BETA_DB = -15.0
_STOI_DYN_RANGE_DB = 40.0


def _to_10k(signal: Signal) -> np.ndarray:
    if signal.sample_rate_hz == _STOI_FS:
        return signal.samples.astype(np.float64)
    g = math.gcd(signal.sample_rate_hz, _STOI_FS)
    return resample_poly(signal.samples, _STOI_FS // g, signal.sample_rate_hz // g)


def _frame(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    starts = range(0, x.size - _STOI_FRAME + 1, _STOI_HOP)
    return np.array([w * x[s : s + _STOI_FRAME] for s in starts])


def _remove_silent_frames(x: np.ndarray, y: np.ndarray, w: np.ndarray):
    xf = _frame(x, w)
    yf = _frame(y, w)
    energies_db = 20.0 * np.log10(np.linalg.norm(xf, axis=1) + _EPS)
    keep = energies_db > np.max(energies_db) - _STOI_DYN_RANGE_DB
    xf, yf = xf[keep], yf[keep]
    # overlap-add back to waveforms (hann at 50% overlap sums to ~1)
    n = (len(xf) - 1) * _STOI_HOP + _STOI_FRAME if len(xf) else 0
    xs, ys = np.zeros(n), np.zeros(n)
    for i in range(len(xf)):
        s = i * _STOI_HOP
        xs[s : s + _STOI_FRAME] += xf[i]
        ys[s : s + _STOI_FRAME] += yf[i]
    return xs, ys


def _third_octave_matrix(fs: int, nfft: int, n_bands: int, min_freq: float) -> np.ndarray:
    f = np.linspace(0, fs / 2, nfft // 2 + 1)
    k = np.arange(n_bands, dtype=np.float64)
    cf = 2.0 ** (k / 3.0) * min_freq
    low = np.sqrt(cf * 2.0 ** ((k - 1) / 3.0) * min_freq)
    high = np.sqrt(cf * 2.0 ** ((k + 1) / 3.0) * min_freq)
    h = np.zeros((n_bands, f.size))
    for i in range(n_bands):
        lo_idx = int(np.argmin((f - low[i]) ** 2))
        hi_idx = int(np.argmin((f - high[i]) ** 2))
        h[i, lo_idx:hi_idx] = 1.0
    return h


def _band_envelopes(x: np.ndarray, w: np.ndarray, h: np.ndarray) -> np.ndarray:
    frames = _frame(x, w)
    spec = np.abs(np.fft.rfft(frames, n=_STOI_NFFT, axis=1)) ** 2
    return np.sqrt(h @ spec.T)  # (bands, frames)


def stoi(clean: Signal, degraded: Signal) -> float:
    """Short-time objective intelligibility of ``degraded`` against
    ``clean``; approximately [0, 1], higher is more intelligible.

    Both signals are resampled to 10 kHz internally; the degraded signal is
    padded or trimmed to the clean one's length.
    """
    if clean.sample_rate_hz != degraded.sample_rate_hz:
        raise InvalidParameterError("clean and degraded must share a sample rate")
    x = _to_10k(clean)
    y = _to_10k(degraded)
    if y.size < x.size:
        y = np.pad(y, (0, x.size - y.size))
    else:
        y = y[: x.size]

    min_len = _STOI_FRAME + (_STOI_SEG_FRAMES - 1) * _STOI_HOP
    if x.size < min_len:
        raise TooShortError(
            f"need at least {min_len} samples at {_STOI_FS} Hz "
            f"(one {_STOI_SEG_FRAMES}-frame segment), got {x.size}"
        )

    w = np.hanning(_STOI_FRAME + 2)[1:-1]
    x, y = _remove_silent_frames(x, y, w)
    if x.size < min_len:
        raise TooShortError("fewer than one analysis segment remains after silence removal")

    h = _third_octave_matrix(_STOI_FS, _STOI_NFFT, _STOI_BANDS, _STOI_MIN_FREQ)
    xb = _band_envelopes(x, w, h)
    yb = _band_envelopes(y, w, h)

    clip_gain = 10.0 ** (-_STOI_BETA_DB / 20.0)
    n_frames = xb.shape[1]
    correlations = []
    for m in range(_STOI_SEG_FRAMES, n_frames + 1):
        xs = xb[:, m - _STOI_SEG_FRAMES : m]
        ys = yb[:, m - _STOI_SEG_FRAMES : m]
        alpha = np.linalg.norm(xs, axis=1, keepdims=True) / (
            np.linalg.norm(ys, axis=1, keepdims=True) + _EPS
        )
        ys_prime = np.minimum(ys * alpha, xs * (1.0 + clip_gain))
        xc = xs - xs.mean(axis=1, keepdims=True)
        yc = ys_prime - ys_prime.mean(axis=1, keepdims=True)
        num = np.sum(xc * yc, axis=1)
        den = np.linalg.norm(xc, axis=1) * np.linalg.norm(yc, axis=1) + _EPS
        correlations.append(num / den)
    return float(np.mean(correlations))


# -- edit distance ---------------------------------------------------------------


def levenshtein(a: Sequence, b: Sequence) -> int:
    """Unit-cost insert/delete/substitute edit distance."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(
                    previous[j] + 1,  # delete
                    current[j - 1] + 1,  # insert
                    previous[j - 1] + (ca != cb),  # substitute
                )
            )
        previous = current
    return previous[-1]


def levenshtein_ratio(a: str, b: str, level: str = "char") -> float:
    """Similarity in [0, 1]: 1 - distance / max length. 1 means equal
    (including two empty strings), 0 means nothing survives.

    ``level`` is "char" or "word" (whitespace tokens).
    """
    if level == "word":
        sa: Sequence = a.split()
        sb: Sequence = b.split()
    elif level == "char":
        sa, sb = a, b
    else:
        raise InvalidParameterError(f"level must be char|word, got {level!r}")
    longest = max(len(sa), len(sb))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(sa, sb) / longest


# -- rank statistics --------------------------------------------------------------


@dataclass(frozen=True)
class MannWhitneyResult:
    u_statistic: float  # U for the first sample
    p_value: float  # two-sided, normal approximation with tie correction
    z: float
    normal_approx_reliable: bool  # False when either sample has n < 8


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def mann_whitney_u(x: Sequence[float], y: Sequence[float]) -> MannWhitneyResult:
    """Mann-Whitney U with average ranks for ties and a continuity-corrected
    normal p-value.

    U counts (x, y) pairs where x ranks higher (ties half). The identity
    U(x, y) + U(y, x) = len(x) * len(y) holds exactly.
    """
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.ndim != 1 or ya.ndim != 1 or xa.size < 1 or ya.size < 1:
        raise InvalidParameterError("x and y must be non-empty 1-d samples")
    nx, ny = xa.size, ya.size
    combined = np.concatenate([xa, ya])
    if np.all(combined == combined[0]):
        raise DegenerateInputError("all values identical across both samples")
    ranks = _average_ranks(combined)
    r1 = float(np.sum(ranks[:nx]))
    u1 = r1 - nx * (nx + 1) / 2.0

    n = nx + ny
    _, tie_counts = np.unique(combined, return_counts=True)
    tie_term = float(np.sum(tie_counts**3 - tie_counts))
    variance = (nx * ny / 12.0) * ((n + 1) - tie_term / (n * (n - 1)))
    if variance <= 0:
        raise DegenerateInputError("zero variance in rank statistic")
    mu = nx * ny / 2.0
    diff = u1 - mu
    correction = 0.5 * np.sign(diff)
    z = (diff - correction) / math.sqrt(variance) if diff != 0 else 0.0
    p = min(1.0, math.erfc(abs(z) / math.sqrt(2.0)))
    return MannWhitneyResult(
        u_statistic=u1,
        p_value=p,
        z=float(z),
        normal_approx_reliable=min(nx, ny) >= 8,
    )
