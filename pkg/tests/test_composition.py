import numpy as np
import pytest

from freqsift import (
    InvalidInputError,
    InvalidParameterError,
    SearchNotFoundError,
    Signal,
    classify,
    compose_global,
    cross_label_transplant,
    top1,
)

from conftest import RATE, tone

N = 1024


class TestComposeGlobal:
    def test_single_signal_degree_one(self, oracle3):
        sig = tone(1900)  # class 1
        cs = compose_global(oracle3, [sig], class_index=1)
        assert cs.degree == 1.0
        assert cs.member_ids == ("m0000",)
        assert np.allclose(cs.signal.samples, sig.samples)

    def test_duplicate_signals_mean_is_the_signal(self, oracle3):
        sig = tone(1900)
        cs = compose_global(oracle3, [sig, sig], class_index=1)
        assert cs.degree == 1.0
        assert np.allclose(cs.signal.samples, sig.samples)

    def test_composite_reclassifies_to_class(self, oracle3):
        sigs = [tone(1600 + 100 * i) for i in range(8)]
        cs = compose_global(oracle3, sigs, class_index=1)
        assert top1(classify(oracle3, cs.signal)) == 1
        assert 0 < cs.degree <= 1.0

    def test_out_of_class_candidates_rejected_but_counted(self, oracle3):
        in_band = [tone(1600 + 80 * i) for i in range(10)]
        out_band = [tone(3000 + 50 * i) for i in range(5)]  # class 2
        cs = compose_global(oracle3, in_band + out_band, class_index=1)
        assert cs.candidates_considered == 15
        assert len(cs.member_ids) == 10
        assert cs.degree == pytest.approx(10 / 15)
        assert set(cs.member_ids) == {f"m{i:04d}" for i in range(10)}

    def test_greedy_prefix_property(self, oracle3, rng):
        # re-run the oracle on each accepted prefix mean: it must classify
        # to the class at every step (that is exactly the acceptance rule)
        sigs = [
            Signal(tone(1600 + 90 * i).samples + 0.02 * rng.uniform(-1, 1, N), RATE)
            for i in range(12)
        ]
        cs = compose_global(oracle3, sigs, class_index=1, ids=[f"x{i}" for i in range(12)])
        confidences = {
            f"x{i}": classify(oracle3, s).prob_of(1) for i, s in enumerate(sigs)
        }
        padded = {f"x{i}": s.samples for i, s in enumerate(sigs)}
        running = np.zeros(N)
        for k, member in enumerate(cs.member_ids, start=1):
            running = running + padded[member]
            assert top1(classify(oracle3, Signal(running / k, RATE))) == 1
        # members are visited in confidence-descending order
        member_confs = [confidences[m] for m in cs.member_ids]
        assert member_confs == sorted(member_confs, reverse=True)

    def test_phase_opposed_candidate_rejected(self, oracle3):
        # same-class candidate whose tone is phase-inverted against the pool
        # cancels the running mean's in-band energy and is turned away
        base = tone(1875, amplitude=0.5)  # bin 240, class 1
        opposed = Signal(
            tone(1875, amplitude=0.48, phase=np.pi).samples
            + tone(2812.5, amplitude=0.3).samples,
            RATE,
        )
        assert top1(classify(oracle3, opposed)) == 1
        cs = compose_global(oracle3, [base, opposed], class_index=1)
        assert cs.member_ids == ("m0000",)
        assert cs.degree == pytest.approx(0.5)

    def test_empty_input_invalid(self, oracle3):
        with pytest.raises(InvalidParameterError):
            compose_global(oracle3, [], class_index=0)

    def test_no_eligible_candidate(self, oracle3):
        with pytest.raises(SearchNotFoundError):
            compose_global(oracle3, [tone(3000)], class_index=1)

    def test_mixed_sample_rates_rejected(self, oracle3):
        a = tone(1900)
        b = Signal(a.samples, 16000)
        with pytest.raises(InvalidInputError):
            compose_global(oracle3, [a, b], class_index=1)

    def test_shorter_members_zero_padded(self, oracle3):
        long = tone(1900, n=N)
        short = tone(1900, n=N // 2)
        cs = compose_global(oracle3, [long, short], class_index=1)
        assert len(cs.signal) == N


class TestTransplant:
    def composite_of(self, oracle, freq, amplitude=0.9):
        return compose_global(oracle, [tone(freq, amplitude=amplitude)], class_index=1)

    def test_zero_composite_is_identity(self, oracle3):
        from freqsift.composition import CompositeSignature

        zero = CompositeSignature(
            signal=Signal(np.zeros(N), RATE),
            class_index=1,
            member_ids=("z",),
            candidates_considered=1,
            degree=1.0,
        )
        target = tone(700)  # class 0
        out = cross_label_transplant(oracle3, zero, target, mode="add")
        assert not out.flipped
        before = classify(oracle3, target)
        assert np.allclose(out.distribution.probs, before.probs)

    def test_strong_composite_flips_add(self, oracle3):
        composite = self.composite_of(oracle3, 1875, amplitude=0.9)
        target = tone(703.125, amplitude=0.1)
        out = cross_label_transplant(oracle3, composite, target, mode="add")
        assert out.flipped
        assert top1(out.distribution) == 1

    def test_replace_mode_flips(self, oracle3):
        composite = self.composite_of(oracle3, 1875, amplitude=0.6)
        target = tone(703.125, amplitude=0.4)
        out = cross_label_transplant(oracle3, composite, target, mode="replace")
        assert out.flipped

    def test_same_class_target_refused(self, oracle3):
        composite = self.composite_of(oracle3, 1875)
        with pytest.raises(InvalidInputError, match="vacuous"):
            cross_label_transplant(oracle3, composite, tone(1900), mode="add")

    def test_rate_mismatch_refused(self, oracle3):
        composite = self.composite_of(oracle3, 1875)
        target = Signal(tone(700).samples, 16000)
        with pytest.raises(InvalidInputError, match="rate"):
            cross_label_transplant(oracle3, composite, target)

    def test_add_mode_peak_normalizes(self, oracle3):
        composite = self.composite_of(oracle3, 1875, amplitude=0.9)
        target = tone(703.125, amplitude=0.9)
        out = cross_label_transplant(oracle3, composite, target, mode="add")
        assert np.max(np.abs(out.signal.samples)) <= 1.0 + 1e-12
