import numpy as np
import pytest
from scipy.io import wavfile

from freqsift import InvalidInputError, Signal, read_wav, write_wav


def test_float32_round_trip(tmp_path, rng):
    x = rng.uniform(-0.9, 0.9, 1000).astype(np.float32).astype(np.float64)
    path = tmp_path / "f32.wav"
    write_wav(path, Signal(x, 22050), fmt="float32")
    back = read_wav(path)
    assert back.sample_rate_hz == 22050
    assert np.array_equal(back.samples, x)


def test_pcm16_round_trip(tmp_path, rng):
    x = rng.uniform(-0.9, 0.9, 1000)
    path = tmp_path / "p16.wav"
    write_wav(path, Signal(x, 16000), fmt="pcm16")
    back = read_wav(path)
    assert back.sample_rate_hz == 16000
    assert np.max(np.abs(back.samples - x)) <= 0.5 / 32768 + 1e-12


def test_pcm16_clips_out_of_range(tmp_path):
    path = tmp_path / "clip.wav"
    write_wav(path, Signal([1.5, -1.5, 0.0], 8000), fmt="pcm16")
    back = read_wav(path)
    assert back.samples[0] == pytest.approx(32767 / 32768, abs=1e-6)
    assert back.samples[1] == pytest.approx(-1.0, abs=1e-6)


def test_multichannel_rejected(tmp_path):
    path = tmp_path / "stereo.wav"
    stereo = np.zeros((100, 2), dtype=np.int16)
    wavfile.write(path, 8000, stereo)
    with pytest.raises(InvalidInputError, match="mono"):
        read_wav(path)


def test_unsupported_dtype_rejected(tmp_path):
    path = tmp_path / "f64.wav"
    wavfile.write(path, 8000, np.zeros(16, dtype=np.float64))
    with pytest.raises(InvalidInputError, match="unsupported"):
        read_wav(path)


def test_missing_file_raises_filenotfound(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_wav(tmp_path / "nope.wav")


def test_bad_format_name(tmp_path):
    with pytest.raises(InvalidInputError):
        write_wav(tmp_path / "x.wav", Signal([0.0, 0.1], 8000), fmt="mp3")
