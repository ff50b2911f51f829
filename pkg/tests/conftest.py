import numpy as np
import pytest

from freqsift import BandEnergySpec, ClassifierHandle, Signal

RATE = 8000


def tone(freq_hz: float, n: int = 1024, amplitude: float = 0.5, rate: int = RATE,
         phase: float = 0.0) -> Signal:
    t = np.arange(n) / rate
    return Signal(amplitude * np.cos(2 * np.pi * freq_hz * t + phase), rate)


def band_oracle(edges=(0, 1500, 2500, 4000), temperature=0.05, rate=RATE,
                oracle_id="band", labels=None) -> ClassifierHandle:
    spec = BandEnergySpec(band_edges_hz=tuple(edges), temperature=temperature)
    spec.check_rate(rate)
    if labels is None:
        labels = tuple(f"band{i}" for i in range(spec.n_classes))
    return ClassifierHandle(
        id=oracle_id, labels=tuple(labels), backend=spec, expected_sample_rate_hz=rate
    )


@pytest.fixture
def oracle3():
    """3-class band-energy oracle over [0,1500), [1500,2500), [2500,4000]."""
    return band_oracle()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
