import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vocatree.corpus import AudioClip, SynthSpec, generate_synthetic_corpus
from vocatree.dsp import Segmentation, detect_endpoints, frame_and_window, pre_emphasize
from vocatree.errors import InsufficientDataError, ValidationError
from vocatree.features import (
    ACOUSTIC_NAMES,
    FEATURE_NAMES,
    PAUSE_NAMES,
    TREMOR_NAMES,
    FeatureTable,
    acoustic_features,
    assemble_feature_vector,
    energy_features,
    extract_corpus_features,
    feature_schema,
    frame_f0_for,
    modulation_stats,
    pause_features,
    tremor_features,
    write_schema,
)

FS = 16000
HOP = 0.01

# Hand-computed from the interval list silent 0.5 / voiced 1.0 / silent 0.3 / voiced 1.0 / silent 0.2
# (3.0 s at 16 kHz: floor((48000 - 400) / 160) + 1 = 298 frames).
HAND_SEGMENTATION = [("silent", 0.5), ("voiced", 1.0), ("silent", 0.3), ("voiced", 1.0), ("silent", 0.2)]
HAND_VALUES = {
    "max_pause_duration_s": 0.3,
    "reaction_time_s": 0.5,
    "total_recording_time_s": 3.0,
    "total_vocalization_time_s": 2.0,
    "total_pause_time_s": 0.3,
    "number_of_pauses": 1.0,
    "mean_pause_length_s": 0.3,
    "percent_pause_time": 0.1,
    "speech_pause_ratio": 2.0 / 0.3,
    "total_sequence_length_frames": 298.0,
    "max_continuous_voiced_s": 1.0,
    "max_continuous_silent_s": 0.5,
    "number_of_transitions": 4.0,
    "mean_voiced_segment_s": 1.0,
    "mean_silent_segment_s": 1.0 / 3.0,
    "voiced_silent_frame_ratio": 2.0,
}


def tone_clip(f=220.0, dur=1.0, amp=0.5):
    t = np.arange(int(dur * FS)) / FS
    return AudioClip(amp * np.sin(2 * np.pi * f * t), FS)


def front_end(clip):
    e = pre_emphasize(clip.samples)
    return frame_and_window(e, FS), detect_endpoints(e, FS)


class TestSchema:
    def test_dimension_and_blocks(self):
        assert len(FEATURE_NAMES) == 113
        assert (len(PAUSE_NAMES), len(ACOUSTIC_NAMES), len(TREMOR_NAMES)) == (16, 86, 8)
        assert len(set(FEATURE_NAMES)) == 113

    def test_golden_order(self):
        assert FEATURE_NAMES[:3] == ("max_pause_duration_s", "reaction_time_s", "total_recording_time_s")
        assert FEATURE_NAMES[16] == "log_energy_mean"
        assert FEATURE_NAMES[101] == "jitter"
        assert FEATURE_NAMES[102] == "amplitude_tremor_band_rms"
        assert FEATURE_NAMES[-1] == "energy_temporal_centroid_s"

    def test_schema_file(self, tmp_path):
        write_schema(tmp_path / "s.json")
        d = json.loads((tmp_path / "s.json").read_text())
        assert d["dimension"] == 113
        assert [f["name"] for f in d["features"]] == list(FEATURE_NAMES)
        assert {f["block"] for f in feature_schema()} == {"pause", "acoustic", "tremor", "energy"}


class TestPause:
    def test_hand_example(self):
        block = pause_features(Segmentation.from_durations(HAND_SEGMENTATION), HOP, 298)
        for name, want in HAND_VALUES.items():
            assert abs(block.values[name] - want) <= 1e-12, name

    def test_single_voiced(self):
        b = pause_features(Segmentation.from_durations([("voiced", 2.0)]), HOP, 198).values
        assert b["number_of_pauses"] == 0 and b["percent_pause_time"] == 0
        assert b["total_vocalization_time_s"] == b["total_recording_time_s"]

    def test_all_silent(self):
        b = pause_features(Segmentation.from_durations([("silent", 1.5)]), HOP, 148)
        assert b.values["total_vocalization_time_s"] == 0
        assert b.values["number_of_transitions"] == 0
        assert b.values["voiced_silent_frame_ratio"] == 0
        assert "all_silent" in b.flags

    def test_zero_duration(self):
        with pytest.raises(ValidationError):
            pause_features(Segmentation(0.0, (), 0.0), HOP, 0)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(0.01, 3.0), min_size=1, max_size=12), st.booleans())
    def test_identity_and_bounds(self, durs, start_voiced):
        kinds = ["voiced", "silent"] if start_voiced else ["silent", "voiced"]
        seg = Segmentation.from_durations([(kinds[i % 2], d) for i, d in enumerate(durs)])
        v = pause_features(seg, HOP, 10).values
        ivs = seg.intervals
        trailing = ivs[-1].duration_s if ivs[-1].kind == "silent" and len(ivs) > 1 else 0.0
        if not seg.voiced():
            trailing = 0.0
        total = v["total_vocalization_time_s"] + v["total_pause_time_s"] + v["reaction_time_s"] + trailing
        assert abs(total - v["total_recording_time_s"]) <= 1.0 / FS
        assert v["total_vocalization_time_s"] + v["total_pause_time_s"] <= v["total_recording_time_s"] + 1e-12
        assert 0 <= v["percent_pause_time"] <= 1
        if v["number_of_pauses"] == 0:
            assert v["max_pause_duration_s"] == v["mean_pause_length_s"] == 0


class TestAcoustic:
    def test_tone_f0(self):
        # a stationary tone has no quiet lead-in for the noise floor, so mark it voiced by hand
        clip = tone_clip()
        frames, _ = front_end(clip)
        b = acoustic_features(clip, frames, Segmentation.from_durations([("voiced", 1.0)])).values
        assert abs(b["f0_mean"] - 220.0) <= 5.0
        assert b["jitter"] < 0.01

    def test_silence(self):
        clip = AudioClip(np.zeros(FS), FS)
        frames, seg = front_end(clip)
        b = acoustic_features(clip, frames, seg)
        assert "no_voiced_f0" in b.flags
        assert all(b.values[f"f0_{f}"] == 0 for f in ("mean", "std", "min", "max", "median"))
        assert abs(b.values["log_energy_mean"] - math.log(1e-10)) < 1e-12

    def test_functional_order(self):
        clip = generate_synthetic_corpus(SynthSpec(n_healthy=1, n_depressed=1, n_male_healthy=1,
                                                   n_male_depressed=1, n_female_healthy=0,
                                                   n_female_depressed=0)).clip("S001", 3)
        frames, seg = front_end(clip)
        b = acoustic_features(clip, frames, seg).values
        for d in ("log_energy", "zcr", "f0", "spectral_centroid", "mfcc1", "mfcc13"):
            assert b[f"{d}_min"] <= b[f"{d}_median"] <= b[f"{d}_max"]
            assert b[f"{d}_std"] >= 0
        assert 60 <= b["f0_min"] and b["f0_max"] <= 400

    def test_scale(self):
        base = tone_clip(amp=0.2)
        double = AudioClip(base.samples * 2, FS)
        seg = Segmentation.from_durations([("voiced", 1.0)])
        a = acoustic_features(base, front_end(base)[0], seg).values
        b = acoustic_features(double, front_end(double)[0], seg).values
        for f in ("mean", "std", "min", "max", "median"):
            assert a[f"zcr_{f}"] == b[f"zcr_{f}"]
        assert abs((b["log_energy_mean"] - a["log_energy_mean"]) - 2 * math.log(2)) < 1e-6


class TestTremor:
    def test_constant(self):
        assert modulation_stats(np.ones(200), 100.0) == (0.0, 0.0, 0.0, 0.0)

    def test_sinusoid(self):
        t = np.arange(200) / 100.0
        env = 1 + 0.3 * np.sin(2 * np.pi * 15 * t)
        rms, peak_f, peak_m, idx = modulation_stats(env, 100.0)
        assert abs(peak_f - 15) <= 0.5
        assert abs(rms - 0.3 / math.sqrt(2)) <= 0.1 * 0.3 / math.sqrt(2)
        assert abs(peak_m - 0.3) < 1e-9
        assert abs(idx - rms) < 1e-12

    def test_out_of_band(self):
        t = np.arange(200) / 100.0
        ref = modulation_stats(1 + 0.3 * np.sin(2 * np.pi * 15 * t), 100.0)[2]
        low = modulation_stats(1 + 0.3 * np.sin(2 * np.pi * 5 * t), 100.0)[2]
        assert low < 0.1 * ref

    def test_short_contour(self):
        with pytest.raises(InsufficientDataError):
            tremor_features(np.ones(50), np.ones(50), 100.0)

    def test_block_names(self):
        b = tremor_features(np.full(150, 200.0), np.ones(150), 100.0)
        assert tuple(b.values) == TREMOR_NAMES
        assert all(v >= 0 for v in b.values.values())


class TestEnergy:
    def test_bounds(self):
        clip = tone_clip(f=200.0)
        v = energy_features(clip).values
        assert v["low_frequency_ratio"] > 0.99
        assert 0 <= v["energy_temporal_centroid_s"] <= clip.duration_s
        assert abs(v["energy_temporal_centroid_s"] - 0.5) < 0.01

    def test_high_tone(self):
        assert energy_features(tone_clip(f=3000.0)).values["low_frequency_ratio"] < 0.01


@pytest.fixture(scope="module")
def corpus():
    return generate_synthetic_corpus(SynthSpec(n_healthy=2, n_depressed=2, n_male_healthy=1, n_male_depressed=1,
                                               n_female_healthy=1, n_female_depressed=1, rng_seed=11))


class TestAssembly:
    def test_dimension_and_determinism(self, corpus):
        clip = corpus.clip("S002", 8)
        a = assemble_feature_vector(clip)
        b = assemble_feature_vector(clip)
        assert a.values.shape == (113,) and a.names == FEATURE_NAMES
        assert np.array_equal(a.values, b.values)

    def test_all_finite(self, corpus):
        for clip in corpus.clips.values():
            assert np.all(np.isfinite(assemble_feature_vector(clip).values))

    def test_scale_invariance(self, corpus):
        clip = corpus.clip("S001", 19)
        a = assemble_feature_vector(clip).as_dict()
        b = assemble_feature_vector(AudioClip(clip.samples * 0.5, FS)).as_dict()
        for name in ("zcr_mean", "percent_pause_time", "low_frequency_ratio", "f0_mean", "f0_median"):
            assert abs(a[name] - b[name]) <= 1e-9, name

    def test_silent_clip(self):
        v = assemble_feature_vector(AudioClip(np.zeros(FS), FS))
        assert np.all(np.isfinite(v.values))
        assert "tremor_insufficient_data" in v.flags

    def test_table_roundtrip(self, corpus, tmp_path):
        sub = type(corpus)(corpus.subjects[:1], clips=corpus.clips)
        t = extract_corpus_features(sub)
        t.to_csv(tmp_path / "f.csv")
        back = FeatureTable.from_csv(tmp_path / "f.csv")
        assert back.subjects == t.subjects and back.names == t.names
        for k in t.vectors:
            assert np.array_equal(back.vectors[k], t.vectors[k])

    def test_f0_restricted_to_voiced(self, corpus):
        clip = corpus.clip("S001", 1)
        frames, seg = front_end(clip)
        f0 = frame_f0_for(clip, frames, seg)
        centers = frames.centers_s()
        for t in np.flatnonzero(~np.isnan(f0)):
            assert any(iv.start_s <= centers[t] < iv.end_s for iv in seg.voiced())
