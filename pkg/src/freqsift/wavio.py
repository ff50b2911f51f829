"""Mono WAV reading and writing (PCM 16-bit and 32-bit float).

Multi-channel files are rejected rather than silently downmixed, and sample
rates are preserved as-is; resampling is not this module's job.
"""

from __future__ import annotations

import os

import numpy as np
from scipy.io import wavfile

from .errors import InvalidInputError
from .signal import Signal

__all__ = ["read_wav", "write_wav"]


def read_wav(path: str | os.PathLike) -> Signal:
    """Read a mono PCM16 or float32 WAV file into a Signal in [-1, 1]."""
    try:
        rate, data = wavfile.read(os.fspath(path))
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise InvalidInputError(f"cannot read WAV file {path}: {exc}") from exc
    if data.ndim != 1:
        raise InvalidInputError(
            f"{path}: expected mono audio, got {data.shape[1]} channels"
        )
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise InvalidInputError(
            f"{path}: unsupported sample format {data.dtype}; "
            "only PCM16 and float32 are handled"
        )
    return Signal(samples=samples, sample_rate_hz=int(rate))


def write_wav(path: str | os.PathLike, signal: Signal, fmt: str = "float32") -> None:
    """Write ``signal`` as a mono WAV file.

    ``fmt`` is "float32" (lossless for our purposes) or "pcm16"
    (clipped to [-1, 1] and quantized).
    """
    if fmt == "float32":
        data = signal.samples.astype(np.float32)
    elif fmt == "pcm16":
        clipped = np.clip(signal.samples, -1.0, 1.0)
        data = np.clip(np.round(clipped * 32768.0), -32768, 32767).astype(np.int16)
    else:
        raise InvalidInputError(f"unsupported WAV format {fmt!r}")
    wavfile.write(os.fspath(path), signal.sample_rate_hz, data)
