import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import pre_emphasis_loop
from vocatree.dsp import (
    FrameSpec,
    PreEmphasisConfig,
    Segmentation,
    VadConfig,
    detect_endpoints,
    frame_and_window,
    hamming_window,
    pre_emphasize,
    short_time_energy,
    zero_crossing_rate,
)
from vocatree.errors import EmptyInputError, TooShortError, ValidationError

FS = 16000
finite = st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False)


def tone(dur, f=200.0, amp=0.5, fs=FS):
    t = np.arange(int(round(dur * fs))) / fs
    return amp * np.sin(2 * np.pi * f * t)


def quiet(dur, fs=FS, seed=0):
    return np.random.default_rng(seed).normal(0, 1e-4, int(round(dur * fs)))


def tone_gap_tone(gap_s, seed=0):
    return np.concatenate([quiet(0.3, seed=seed), tone(1.0), quiet(gap_s, seed=seed + 1), tone(1.0),
                           quiet(0.3, seed=seed + 2)])


class TestPreEmphasis:
    def test_zero(self):
        assert np.array_equal(pre_emphasize([0.0, 0.0, 0.0]), [0.0, 0.0, 0.0])

    def test_impulse(self):
        assert np.allclose(pre_emphasize([1.0, 0.0, 0.0]), [1.0, -0.97, 0.0], atol=0, rtol=0)

    def test_matches_loop(self):
        x = np.random.default_rng(1).normal(size=1000)
        assert np.max(np.abs(pre_emphasize(x) - pre_emphasis_loop(x))) < 1e-12

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            pre_emphasize([])

    def test_mu_range(self):
        with pytest.raises(ValidationError):
            PreEmphasisConfig(mu=1.0)

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, 64, elements=finite), arrays(np.float64, 64, elements=finite), finite, finite)
    def test_linearity(self, x, y, a, b):
        lhs = pre_emphasize(a * x + b * y)
        rhs = a * pre_emphasize(x) + b * pre_emphasize(y)
        assert np.max(np.abs(lhs - rhs)) < 1e-12

    @settings(max_examples=30, deadline=None)
    @given(arrays(np.float64, st.integers(1, 200), elements=finite))
    def test_inverse_recursion(self, x):
        y = pre_emphasize(x)
        rec = np.empty_like(y)
        rec[0] = y[0]
        for n in range(1, y.size):
            rec[n] = y[n] + 0.97 * rec[n - 1]
        assert np.allclose(rec, x, atol=1e-9)


class TestHamming:
    @pytest.mark.parametrize("n", [3, 11, 64, 401])
    def test_endpoints_and_symmetry(self, n):
        w = hamming_window(n)
        assert w.size == n
        assert abs(w[0] - 0.08) < 1e-12 and abs(w[-1] - 0.08) < 1e-12
        assert np.max(np.abs(w - w[::-1])) < 1e-12
        if n % 2:
            assert abs(w[(n - 1) // 2] - 1.0) < 1e-12

    def test_too_short(self):
        with pytest.raises(ValidationError):
            hamming_window(1)


class TestFraming:
    def test_counts(self):
        fs = frame_and_window(np.ones(16000), FS)
        assert (fs.frame_len, fs.hop, fs.n_frames) == (400, 160, 98)
        assert fs.n_frames == (16000 - 400) // 160 + 1

    def test_rectangular_equals_slices(self):
        x = np.random.default_rng(0).normal(size=2000)
        fs = frame_and_window(x, FS, FrameSpec(window="rectangular"))
        for t in range(fs.n_frames):
            assert np.array_equal(fs.frames[t], x[t * 160:t * 160 + 400])

    def test_hamming_product(self):
        x = np.random.default_rng(0).normal(size=1000)
        fs = frame_and_window(x, FS)
        assert np.allclose(fs.frames[2], x[320:720] * hamming_window(400), rtol=0, atol=1e-15)

    def test_exact_one_frame(self):
        assert frame_and_window(np.ones(400), FS).n_frames == 1

    def test_shorter_than_frame(self):
        fs = frame_and_window(np.ones(100), FS)
        assert fs.n_frames == 0 and fs.too_short

    @settings(max_examples=30, deadline=None)
    @given(st.integers(400, 5000))
    def test_coverage(self, n):
        fs = frame_and_window(np.ones(n), FS)
        last = (fs.n_frames - 1) * fs.hop + fs.frame_len
        covered = np.zeros(n, dtype=bool)
        for t in range(fs.n_frames):
            covered[t * fs.hop:t * fs.hop + fs.frame_len] = True
        assert covered[:last].all()


class TestFrameDescriptors:
    def test_energy(self):
        fs = frame_and_window(np.ones(400), FS, FrameSpec(window="rectangular"))
        assert short_time_energy(fs)[0] == 400.0
        z = frame_and_window(np.zeros(400), FS)
        assert short_time_energy(z)[0] == 0.0

    def test_energy_oracle(self):
        x = np.random.default_rng(3).normal(size=400 + 160 * 9)
        fs = frame_and_window(x, FS)
        ref = [sum(v * v for v in fr) for fr in fs.frames]
        assert np.max(np.abs(short_time_energy(fs) - ref)) < 1e-12

    def test_zcr_cases(self):
        spec = FrameSpec(frame_ms=0.25, hop_ms=0.25, window="rectangular")
        fs = frame_and_window(np.array([1.0, -1.0, 1.0, 1.0]), FS, spec)
        assert abs(zero_crossing_rate(fs)[0] - 2 / 3) < 1e-15
        alt = frame_and_window(np.array([1.0, -1.0] * 200), FS, FrameSpec(window="rectangular"))
        assert zero_crossing_rate(alt)[0] == 1.0
        const = frame_and_window(np.full(400, 0.3), FS, FrameSpec(window="rectangular"))
        assert zero_crossing_rate(const)[0] == 0.0

    def test_zcr_zero_counts_positive(self):
        spec = FrameSpec(frame_ms=0.25, hop_ms=0.25, window="rectangular")
        fs = frame_and_window(np.array([0.0, -1.0, 0.0, 1.0]), FS, spec)
        assert abs(zero_crossing_rate(fs)[0] - 2 / 3) < 1e-15


def assert_tiling(seg: Segmentation):
    ivs = seg.intervals
    assert ivs[0].start_s == 0.0
    assert abs(ivs[-1].end_s - seg.total_duration_s) <= 1 / FS
    for a, b in zip(ivs, ivs[1:]):
        assert a.end_s == b.start_s
        assert a.kind != b.kind


class TestEndpoints:
    def test_two_tones(self):
        seg = detect_endpoints(tone_gap_tone(0.5), FS)
        assert len(seg.voiced()) == 2
        pauses = seg.pauses()
        assert len(pauses) == 1
        assert abs(pauses[0].duration_s - 0.5) <= 2 * 0.01
        assert_tiling(seg)

    def test_short_gap_merged(self):
        seg = detect_endpoints(tone_gap_tone(0.05), FS)
        assert len(seg.voiced()) == 1 and seg.pauses() == []

    def test_noise_only(self):
        seg = detect_endpoints(quiet(2.0), FS)
        assert seg.voiced() == []
        assert "all_silent" in seg.flags
        assert seg.reaction_time_s == seg.total_duration_s

    def test_too_short(self):
        with pytest.raises(TooShortError):
            detect_endpoints(quiet(0.1), FS)

    def test_reaction_time(self):
        seg = detect_endpoints(tone_gap_tone(0.5), FS)
        assert abs(seg.reaction_time_s - 0.3) <= 0.02

    @settings(max_examples=10, deadline=None)
    @given(st.floats(0.05, 0.6), st.integers(0, 5))
    def test_min_pause_monotone(self, gap, seed):
        x = tone_gap_tone(gap, seed)
        counts = [len(detect_endpoints(x, FS, vad=VadConfig(min_pause_ms=m)).pauses()) for m in (50, 200, 400)]
        assert counts[0] >= counts[1] >= counts[2]

    def test_invariants_on_corpus_clip(self):
        from vocatree.corpus import SynthSpec, generate_synthetic_corpus
        c = generate_synthetic_corpus(SynthSpec(n_healthy=1, n_depressed=1, n_male_healthy=1, n_male_depressed=1,
                                                n_female_healthy=0, n_female_depressed=0))
        for s in c.subjects:
            seg = detect_endpoints(pre_emphasize(c.clip(s.subject_id, 19).samples), FS)
            assert_tiling(seg)
            assert all(v.duration_s >= 0.1 - 1e-9 for v in seg.voiced())
            assert all(p.duration_s >= 0.2 - 1e-9 for p in seg.pauses())

    def test_json_roundtrip(self):
        seg = detect_endpoints(tone_gap_tone(0.5), FS)
        import json
        assert Segmentation.from_dict(json.loads(seg.to_json())) == seg
