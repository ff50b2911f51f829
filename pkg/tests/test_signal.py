import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freqsift import (
    Fill,
    FrequencyMask,
    InvalidParameterError,
    Signal,
    Spectrum,
    UnsupportedConfigurationError,
    apply_mask,
    forward_fft,
    inverse_fft,
    istft,
    reconstruct,
    stft,
)

RATE = 16000


def naive_rdft(x: np.ndarray, n_fft: int, bins=None) -> np.ndarray:
    """Direct O(n^2) one-sided DFT via a root lookup table; the independent
    oracle against which the FFT path is checked."""
    x = np.pad(np.asarray(x, dtype=np.float64), (0, n_fft - len(x)))
    roots = np.exp(-2j * np.pi * np.arange(n_fft) / n_fft)
    t = np.arange(n_fft)
    bins = list(range(n_fft // 2 + 1)) if bins is None else list(bins)
    out = np.empty(len(bins), dtype=complex)
    for i, k in enumerate(bins):
        out[i] = np.sum(x * roots[(k * t) % n_fft])
    return out


class TestTypes:
    def test_signal_invariants(self):
        with pytest.raises(InvalidParameterError):
            Signal(np.array([]), 8000)
        with pytest.raises(InvalidParameterError):
            Signal(np.array([np.nan]), 8000)
        with pytest.raises(InvalidParameterError):
            Signal(np.array([0.0]), 0)
        sig = Signal([0.1, -0.2], 8000)
        assert not sig.samples.flags.writeable

    def test_spectrum_bin_count(self):
        with pytest.raises(InvalidParameterError):
            Spectrum(np.zeros(4, dtype=complex), n_fft=8, sample_rate_hz=8000)
        spec = Spectrum(np.zeros(5, dtype=complex), n_fft=8, sample_rate_hz=8000)
        assert spec.n_bins == 5

    def test_mask_helpers(self):
        m = FrequencyMask([1, 0, 1, 1])
        assert m.popcount() == 3
        assert m.complement().popcount() == 1
        assert FrequencyMask.full(6).is_full()
        assert FrequencyMask.empty(6).is_empty()
        assert FrequencyMask([1, 0, 0, 0]).is_subset_of(m)
        assert not m.is_subset_of(FrequencyMask([1, 0, 0, 0]))


class TestForwardFft:
    def test_zero_signal_zero_bins(self):
        spec = forward_fft(Signal(np.zeros(8), RATE))
        assert np.all(spec.bins == 0)

    def test_unit_impulse_flat_spectrum(self):
        x = np.zeros(8)
        x[0] = 1.0
        spec = forward_fft(Signal(x, RATE), n_fft=8)
        assert np.allclose(spec.bins, np.ones(5))

    def test_pure_tone_dominant_bin_closed_form(self):
        # 1000 Hz at 16 kHz over one second: all energy in bin 1000 with
        # magnitude n/2, checked against the direct DFT at probe bins.
        n = 16000
        t = np.arange(n) / RATE
        x = np.cos(2 * np.pi * 1000 * t)
        spec = forward_fft(Signal(x, RATE), n_fft=n)
        mags = np.abs(spec.bins)
        assert np.argmax(mags) == 1000
        assert mags[1000] == pytest.approx(n / 2, rel=1e-12)
        probe = [0, 1, 500, 998, 999, 1000, 1001, 1002, 4000, 8000]
        oracle = naive_rdft(x, n, bins=probe)
        assert np.allclose(spec.bins[probe], oracle, atol=1e-6 * n)

    def test_matches_direct_dft_oracle(self, rng):
        for n in (16, 63, 256):
            x = rng.uniform(-1, 1, size=n)
            spec = forward_fft(Signal(x, RATE), n_fft=n)
            assert np.allclose(spec.bins, naive_rdft(x, n), atol=1e-9 * n)

    def test_dc_and_nyquist_bins_are_real(self, rng):
        for n in (16, 64, 255):
            spec = forward_fft(Signal(rng.uniform(-1, 1, n), RATE), n_fft=n)
            assert spec.bins[0].imag == 0.0
            if n % 2 == 0:
                assert spec.bins[-1].imag == 0.0

    def test_invalid_parameters(self):
        sig = Signal(np.ones(16), RATE)
        with pytest.raises(InvalidParameterError):
            forward_fft(sig, n_fft=1)
        with pytest.raises(InvalidParameterError):
            forward_fft(sig, n_fft=8)  # smaller than the signal


class TestInverseFft:
    def test_zero_spectrum(self):
        spec = Spectrum(np.zeros(9, dtype=complex), n_fft=16, sample_rate_hz=RATE)
        assert np.all(inverse_fft(spec).samples == 0)

    def test_round_trip_random(self, rng):
        x = rng.uniform(-1, 1, size=4096)
        sig = Signal(x, RATE)
        back = inverse_fft(forward_fft(sig), out_len=4096)
        assert np.max(np.abs(back.samples - x)) < 1e-9

    def test_single_bin_is_cosine(self):
        # one nonzero bin k=1000 at n_fft=16000 reconstructs a pure
        # 1000 Hz cosine; checked against the direct inverse expression
        n = 16000
        bins = np.zeros(n // 2 + 1, dtype=complex)
        bins[1000] = n / 2
        sig = inverse_fft(Spectrum(bins, n_fft=n, sample_rate_hz=RATE))
        t = np.arange(n) / RATE
        assert np.max(np.abs(sig.samples - np.cos(2 * np.pi * 1000 * t))) < 1e-9

    def test_out_len_validation(self):
        spec = Spectrum(np.zeros(9, dtype=complex), n_fft=16, sample_rate_hz=RATE)
        with pytest.raises(InvalidParameterError):
            inverse_fft(spec, out_len=17)

    def test_round_trip_padded_odd_lengths(self, rng):
        for n in (3, 31, 101, 1001):
            x = rng.uniform(-1, 1, size=n)
            back = inverse_fft(forward_fft(Signal(x, RATE), n_fft=2 * n + 1), out_len=n)
            assert np.max(np.abs(back.samples - x)) < 1e-9


class TestParseval:
    def test_energy_identity(self, rng):
        for n in (8, 17, 256, 4097):
            x = rng.uniform(-1, 1, size=n)
            sig = Signal(x, RATE)
            spec = forward_fft(sig)
            assert spec.energy() == pytest.approx(sig.energy(), rel=1e-9)


class TestApplyMask:
    def test_identity_mask(self, rng):
        spec = forward_fft(Signal(rng.uniform(-1, 1, 64), RATE))
        out = apply_mask(spec, FrequencyMask.full(spec.n_bins))
        assert np.array_equal(out.bins, spec.bins)

    def test_all_zeros_mask(self, rng):
        spec = forward_fft(Signal(rng.uniform(-1, 1, 64), RATE))
        out = apply_mask(spec, FrequencyMask.empty(spec.n_bins))
        assert np.all(out.bins == 0)

    def test_single_bin_keeps_tone(self):
        n = 16000
        t = np.arange(n) / RATE
        sig = Signal(np.cos(2 * np.pi * 1000 * t), RATE)
        spec = forward_fft(sig)
        keep = np.zeros(spec.n_bins, dtype=bool)
        keep[1000] = True
        recon = inverse_fft(apply_mask(spec, FrequencyMask(keep)), out_len=n)
        residual = np.sum((recon.samples - sig.samples) ** 2)
        assert residual < 1e-12

    def test_length_mismatch(self, rng):
        spec = forward_fft(Signal(rng.uniform(-1, 1, 64), RATE))
        with pytest.raises(InvalidParameterError):
            apply_mask(spec, FrequencyMask.full(spec.n_bins + 1))

    def test_constant_and_noise_fills_deterministic(self, rng):
        spec = forward_fft(Signal(rng.uniform(-1, 1, 64), RATE))
        mask = FrequencyMask(np.arange(spec.n_bins) % 2 == 0)
        const = apply_mask(spec, mask, fill=Fill("constant", value=0.25))
        assert np.all(const.bins[~mask.keep] == 0.25)
        n1 = apply_mask(spec, mask, fill=Fill("noise", seed=9))
        n2 = apply_mask(spec, mask, fill=Fill("noise", seed=9))
        n3 = apply_mask(spec, mask, fill=Fill("noise", seed=10))
        assert np.array_equal(n1.bins, n2.bins)
        assert not np.array_equal(n1.bins, n3.bins)

    @given(st.integers(min_value=0, max_value=2**20 - 1))
    @settings(max_examples=40, deadline=None)
    def test_zero_fill_idempotent(self, bits):
        rng = np.random.default_rng(7)
        spec = forward_fft(Signal(rng.uniform(-1, 1, 38), RATE))
        keep = np.array([(bits >> i) & 1 for i in range(spec.n_bins)], dtype=bool)
        mask = FrequencyMask(keep)
        once = apply_mask(spec, mask)
        twice = apply_mask(once, mask)
        assert np.array_equal(once.bins, twice.bins)

    def test_energy_monotone_in_mask(self, rng):
        spec = forward_fft(Signal(rng.uniform(-1, 1, 128), RATE))
        small = np.zeros(spec.n_bins, dtype=bool)
        small[5:20] = True
        big = small.copy()
        big[30:50] = True
        e_small = apply_mask(spec, FrequencyMask(small)).energy()
        e_big = apply_mask(spec, FrequencyMask(big)).energy()
        assert e_small <= e_big + 1e-15


class TestStft:
    def test_single_rect_frame_equals_fft(self, rng):
        x = rng.uniform(-1, 1, 64)
        sig = Signal(x, RATE)
        frames = stft(sig, win_len=64, hop=64, window="rect")
        assert len(frames) == 1
        assert np.allclose(frames[0].bins, forward_fft(sig, n_fft=64).bins)

    def test_hann_half_overlap_round_trip(self, rng):
        x = rng.uniform(-1, 1, 4096)
        sig = Signal(x, RATE)
        frames = stft(sig, win_len=512, hop=256, window="hann")
        back = istft(frames, hop=256, window="hann", out_len=4096)
        assert np.max(np.abs(back.samples - x)) < 1e-6

    def test_tone_dominant_bin_per_frame(self):
        n = 8192
        t = np.arange(n) / RATE
        sig = Signal(np.cos(2 * np.pi * 1000 * t), RATE)
        frames = stft(sig, win_len=512, hop=256, window="hann")
        expected_bin = round(1000 * 512 / RATE)
        # skip the zero-padded boundary frames at either end
        for frame in frames[2:-2]:
            assert np.argmax(np.abs(frame.bins)) == expected_bin

    def test_non_cola_rejected(self, rng):
        sig = Signal(rng.uniform(-1, 1, 1024), RATE)
        frames = stft(sig, win_len=512, hop=300, window="hann")
        with pytest.raises(UnsupportedConfigurationError):
            istft(frames, hop=300, window="hann")

    def test_parameter_validation(self, rng):
        sig = Signal(rng.uniform(-1, 1, 64), RATE)
        with pytest.raises(InvalidParameterError):
            stft(sig, win_len=32, hop=0)
        with pytest.raises(InvalidParameterError):
            stft(sig, win_len=32, hop=40)
        with pytest.raises(InvalidParameterError):
            stft(sig, win_len=32, hop=16, window="hamming")


def test_reconstruct_is_mask_roundtrip(rng):
    x = rng.uniform(-1, 1, 256)
    sig = Signal(x, RATE)
    full = reconstruct(sig, FrequencyMask.full(129))
    assert np.max(np.abs(full.samples - x)) < 1e-9


def test_framewise_identical_mask_long_signal(rng):
    # long-signal mode: apply the same per-frame mask to every STFT frame,
    # then overlap-add; dropped frequencies stay suppressed end to end
    n = 16384
    t = np.arange(n) / RATE
    sig = Signal(
        0.4 * np.cos(2 * np.pi * 1000 * t) + 0.4 * np.cos(2 * np.pi * 5000 * t), RATE
    )
    frames = stft(sig, win_len=512, hop=256, window="hann")
    freqs = frames[0].bin_frequencies_hz()
    mask = FrequencyMask(freqs < 3000)  # keep the 1 kHz tone, drop 5 kHz
    filtered = istft(
        [apply_mask(f, mask) for f in frames], hop=256, window="hann", out_len=n
    )
    spec = forward_fft(filtered)
    f_full = spec.bin_frequencies_hz()
    kept_energy = np.sum(np.abs(spec.bins[np.abs(f_full - 1000) < 50]) ** 2)
    dropped_energy = np.sum(np.abs(spec.bins[np.abs(f_full - 5000) < 50]) ** 2)
    assert dropped_energy < 1e-4 * kept_energy
