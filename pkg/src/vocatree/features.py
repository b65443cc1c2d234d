"""Per-clip feature extraction: 16 pause, 86 acoustic, 8 tremor and 3 energy features (113 total)."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import fft as sfft
from scipy.fft import dct

from .corpus import AudioClip, Corpus
from .dsp import (
    FrameSequence,
    FrameSpec,
    PreEmphasisConfig,
    Segmentation,
    VadConfig,
    detect_endpoints,
    frame_and_window,
    pre_emphasize,
    short_time_energy,
    zero_crossing_rate,
)
from .errors import InsufficientDataError, SchemaError, ValidationError
from .parallel import parallel_map

LOG_FLOOR = 1e-10
N_MEL = 26
N_MFCC = 13
F0_MIN_HZ = 60.0
F0_MAX_HZ = 400.0
VOICING_THRESHOLD = 0.3
TREMOR_BAND_HZ = (10.0, 20.0)
LOW_FREQ_CUTOFF_HZ = 500.0

PAUSE_NAMES = (
    "max_pause_duration_s",
    "reaction_time_s",
    "total_recording_time_s",
    "total_vocalization_time_s",
    "total_pause_time_s",
    "number_of_pauses",
    "mean_pause_length_s",
    "percent_pause_time",
    "speech_pause_ratio",
    "total_sequence_length_frames",
    "max_continuous_voiced_s",
    "max_continuous_silent_s",
    "number_of_transitions",
    "mean_voiced_segment_s",
    "mean_silent_segment_s",
    "voiced_silent_frame_ratio",
)

_DESCRIPTORS = ("log_energy", "zcr", "f0", "spectral_centroid") + tuple(f"mfcc{i}" for i in range(1, N_MFCC + 1))
_FUNCTIONALS = ("mean", "std", "min", "max", "median")
ACOUSTIC_NAMES = tuple(f"{d}_{f}" for d in _DESCRIPTORS for f in _FUNCTIONALS) + ("jitter",)

TREMOR_NAMES = tuple(
    f"{src}_tremor_{q}"
    for src in ("amplitude", "f0")
    for q in ("band_rms", "peak_freq_hz", "peak_magnitude", "modulation_index")
)

ENERGY_NAMES = ("total_log_energy", "low_frequency_ratio", "energy_temporal_centroid_s")

FEATURE_NAMES = PAUSE_NAMES + ACOUSTIC_NAMES + TREMOR_NAMES + ENERGY_NAMES
N_FEATURES = len(FEATURE_NAMES)
assert N_FEATURES == 113


def _block_of(name: str) -> str:
    if name in PAUSE_NAMES:
        return "pause"
    if name in TREMOR_NAMES:
        return "tremor"
    if name in ENERGY_NAMES:
        return "energy"
    return "acoustic"


def _unit_of(name: str) -> str:
    if name.endswith("_s"):
        return "s"
    if name.endswith("_hz") or name.startswith(("f0_", "spectral_centroid")):
        return "Hz"
    if name in ("number_of_pauses", "number_of_transitions"):
        return "count"
    if name == "total_sequence_length_frames":
        return "frames"
    if name.startswith("log_energy") or name == "total_log_energy":
        return "log(energy)"
    return "ratio" if "ratio" in name or name.startswith("zcr") or name in (
        "percent_pause_time", "jitter") or name.endswith("modulation_index") else "dimensionless"


def feature_schema() -> list[dict]:
    return [{"name": n, "block": _block_of(n), "unit": _unit_of(n)} for n in FEATURE_NAMES]


@dataclass(frozen=True)
class FeatureBlock:
    values: dict[str, float]
    flags: tuple[str, ...] = ()

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    def array(self) -> np.ndarray:
        return np.array(list(self.values.values()), dtype=np.float64)


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    names: tuple[str, ...] = FEATURE_NAMES
    flags: tuple[str, ...] = ()

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))


# ---------------------------------------------------------------------------
# pause block


def pause_features(seg: Segmentation, hop_s: float, n_frames: int) -> FeatureBlock:
    total = seg.total_duration_s
    if total <= 0:
        raise ValidationError("segmentation has zero duration")
    voiced = [iv.duration_s for iv in seg.voiced()]
    silent = [iv.duration_s for iv in seg.intervals if iv.kind == "silent"]
    pauses = [iv.duration_s for iv in seg.pauses()]

    vocal = float(sum(voiced))
    pause_total = float(sum(pauses))
    silent_total = float(sum(silent))
    values = {
        "max_pause_duration_s": max(pauses, default=0.0),
        "reaction_time_s": seg.reaction_time_s,
        "total_recording_time_s": total,
        "total_vocalization_time_s": vocal,
        "total_pause_time_s": pause_total,
        "number_of_pauses": float(len(pauses)),
        "mean_pause_length_s": pause_total / len(pauses) if pauses else 0.0,
        "percent_pause_time": pause_total / total,
        "speech_pause_ratio": vocal / max(pause_total, hop_s),
        "total_sequence_length_frames": float(n_frames),
        "max_continuous_voiced_s": max(voiced, default=0.0),
        "max_continuous_silent_s": max(silent, default=0.0),
        "number_of_transitions": float(max(len(seg.intervals) - 1, 0)),
        "mean_voiced_segment_s": vocal / len(voiced) if voiced else 0.0,
        "mean_silent_segment_s": silent_total / len(silent) if silent else 0.0,
        "voiced_silent_frame_ratio": vocal / max(silent_total, hop_s),
    }
    return FeatureBlock(values, ("all_silent",) if not voiced else ())


# ---------------------------------------------------------------------------
# acoustic block


def mel_filterbank(n_filters: int, nfft: int, fs: int, fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    """Triangular mel filters, shape ``(n_filters, nfft // 2 + 1)``."""
    fmax = fs / 2.0 if fmax is None else fmax
    mel = lambda f: 2595.0 * np.log10(1.0 + f / 700.0)
    inv = lambda m: 700.0 * (10.0 ** (m / 2595.0) - 1.0)
    edges = inv(np.linspace(mel(fmin), mel(fmax), n_filters + 2))
    freqs = np.arange(nfft // 2 + 1) * fs / nfft
    bank = np.zeros((n_filters, freqs.size))
    for i in range(n_filters):
        lo, mid, hi = edges[i], edges[i + 1], edges[i + 2]
        rising = (freqs - lo) / (mid - lo)
        falling = (hi - freqs) / (hi - mid)
        bank[i] = np.clip(np.minimum(rising, falling), 0.0, None)
    return bank


def _next_pow2(n: int) -> int:
    return 1 << (n - 1).bit_length()


def frame_f0(raw_frames: np.ndarray, fs: int) -> np.ndarray:
    """Autocorrelation pitch per frame; NaN where no peak clears the voicing threshold."""
    n, flen = raw_frames.shape
    out = np.full(n, np.nan)
    if n == 0:
        return out
    lag_lo = int(math.ceil(fs / F0_MAX_HZ))
    lag_hi = min(int(math.floor(fs / F0_MIN_HZ)), flen - 2)
    if lag_hi <= lag_lo:
        return out
    centered = raw_frames - raw_frames.mean(axis=1, keepdims=True)
    nfft = _next_pow2(2 * flen)
    spec = sfft.rfft(centered, nfft, axis=1)
    ac = sfft.irfft(spec.real ** 2 + spec.imag ** 2, nfft, axis=1)[:, :flen]
    r0 = ac[:, 0]
    ok = r0 > 0
    norm = np.zeros_like(ac)
    norm[ok] = ac[ok] / r0[ok, None]
    window = norm[:, lag_lo:lag_hi + 1]
    peak = np.argmax(window, axis=1) + lag_lo
    strength = norm[np.arange(n), peak]
    rows = np.flatnonzero(ok & (strength >= VOICING_THRESHOLD))
    if rows.size == 0:
        return out
    p = peak[rows]
    a, b, c = norm[rows, p - 1], norm[rows, p], norm[rows, p + 1]
    denom = a - 2 * b + c
    safe = np.where(denom < 0, denom, -1.0)
    shift = np.where(denom < 0, 0.5 * (a - c) / safe, 0.0)
    f0 = fs / (p + np.clip(shift, -0.5, 0.5))
    keep = (f0 >= F0_MIN_HZ) & (f0 <= F0_MAX_HZ)
    out[rows[keep]] = f0[keep]
    return out


def _functionals(v: np.ndarray) -> list[float]:
    if v.size == 0:
        return [0.0] * 5
    return [float(np.mean(v)), float(np.std(v)), float(np.min(v)), float(np.max(v)), float(np.median(v))]


def voiced_frame_mask(frames: FrameSequence, seg: Segmentation) -> np.ndarray:
    centers = frames.centers_s()
    mask = np.zeros(frames.n_frames, dtype=bool)
    for iv in seg.voiced():
        mask |= (centers >= iv.start_s) & (centers < iv.end_s)
    return mask


def raw_frames(clip: AudioClip, frames: FrameSequence) -> np.ndarray:
    """Unwindowed, un-emphasized frames aligned with ``frames``."""
    rect = FrameSpec(frames.frame_len * 1000.0 / frames.sample_rate_hz,
                     frames.hop * 1000.0 / frames.sample_rate_hz, "rectangular")
    out = frame_and_window(clip.samples, clip.sample_rate_hz, rect).frames
    if out.shape[1] != frames.frame_len:
        # ms round trip can lose a sample at odd rates; slice directly instead
        idx = np.arange(frames.n_frames)[:, None] * frames.hop + np.arange(frames.frame_len)
        out = clip.samples[idx]
    return out[: frames.n_frames]


def jitter(f0: np.ndarray) -> float:
    """Mean absolute period change between adjacent pitched frames, relative to the mean period."""
    periods = 1.0 / f0
    pairs = ~np.isnan(periods[1:]) & ~np.isnan(periods[:-1])
    if not pairs.any():
        return 0.0
    d = np.abs(np.diff(periods))[pairs]
    return float(np.mean(d) / np.nanmean(periods))


def acoustic_features(clip: AudioClip, frames: FrameSequence, seg: Segmentation, f0: np.ndarray | None = None) -> FeatureBlock:
    if frames.n_frames < 1:
        raise ValidationError("acoustic features need at least one frame")
    fs = frames.sample_rate_hz
    flags = []

    log_e = np.log(np.maximum(short_time_energy(frames), LOG_FLOOR))
    zcr = zero_crossing_rate(frames)

    nfft = _next_pow2(frames.frame_len)
    power = np.abs(sfft.rfft(frames.frames, nfft, axis=1)) ** 2
    freqs = np.arange(nfft // 2 + 1) * fs / nfft
    psum = power.sum(axis=1)
    centroid = np.divide(power @ freqs, psum, out=np.zeros_like(psum), where=psum > 0)
    mel_e = np.log(np.maximum(power @ mel_filterbank(N_MEL, nfft, fs).T, LOG_FLOOR))
    mfcc = dct(mel_e, type=2, norm="ortho", axis=1)[:, 1:N_MFCC + 1]

    if f0 is None:
        f0 = frame_f0_for(clip, frames, seg)
    voiced_f0 = f0[~np.isnan(f0)]
    if voiced_f0.size == 0:
        flags.append("no_voiced_f0")

    vals: list[float] = []
    vals += _functionals(log_e)
    vals += _functionals(zcr)
    vals += _functionals(voiced_f0)
    vals += _functionals(centroid)
    for j in range(N_MFCC):
        vals += _functionals(mfcc[:, j])
    vals.append(jitter(f0) if voiced_f0.size else 0.0)
    return FeatureBlock(dict(zip(ACOUSTIC_NAMES, vals)), tuple(flags))


def frame_f0_for(clip: AudioClip, frames: FrameSequence, seg: Segmentation) -> np.ndarray:
    """F0 per frame, restricted to frames the segmentation marks voiced."""
    f0 = np.full(frames.n_frames, np.nan)
    mask = voiced_frame_mask(frames, seg)
    if mask.any():
        f0[mask] = frame_f0(raw_frames(clip, frames)[mask], frames.sample_rate_hz)
    return f0


# ---------------------------------------------------------------------------
# tremor block


def modulation_stats(contour, rate_hz: float, band=TREMOR_BAND_HZ) -> tuple[float, float, float, float]:
    """(band RMS, peak frequency, peak amplitude, modulation index) of a mean-centred contour."""
    c = np.asarray(contour, dtype=np.float64)
    n = c.size
    mean = float(np.mean(c))
    spec = np.fft.rfft(c - mean)
    freqs = np.arange(spec.size) * rate_hz / n
    inband = (freqs >= band[0]) & (freqs <= band[1])
    mags = np.abs(spec[inband])
    band_rms = math.sqrt(2.0 * float(np.sum(mags ** 2))) / n
    if mags.size == 0 or band_rms == 0.0:
        return 0.0, 0.0, 0.0, 0.0
    k = int(np.argmax(mags))
    peak_freq = float(freqs[inband][k])
    peak_mag = 2.0 * float(mags[k]) / n
    index = band_rms / abs(mean) if abs(mean) > 1e-12 else 0.0
    return band_rms, peak_freq, peak_mag, index


def tremor_features(f0_contour, amp_envelope, contour_rate_hz: float) -> FeatureBlock:
    need = int(math.ceil(contour_rate_hz - 1e-9))
    if len(amp_envelope) < need or len(f0_contour) < need:
        raise InsufficientDataError("tremor analysis needs at least 1 s of contour")
    vals = modulation_stats(amp_envelope, contour_rate_hz) + modulation_stats(f0_contour, contour_rate_hz)
    return FeatureBlock(dict(zip(TREMOR_NAMES, vals)))


def _longest_voiced_run(mask: np.ndarray) -> tuple[int, int] | None:
    best = None
    i = 0
    n = mask.size
    while i < n:
        if mask[i]:
            j = i
            while j + 1 < n and mask[j + 1]:
                j += 1
            if best is None or j - i > best[1] - best[0]:
                best = (i, j)
            i = j + 1
        else:
            i += 1
    return best


def _fill_gaps(v: np.ndarray) -> np.ndarray:
    ok = ~np.isnan(v)
    if not ok.any():
        return np.zeros_like(v)
    idx = np.arange(v.size)
    return np.interp(idx, idx[ok], v[ok])


# ---------------------------------------------------------------------------
# energy block


def energy_features(clip: AudioClip) -> FeatureBlock:
    x = clip.samples
    fs = clip.sample_rate_hz
    sq = x ** 2
    total = float(np.sum(sq))
    nfft = sfft.next_fast_len(len(x), real=True)
    spec = np.abs(sfft.rfft(x, nfft)) ** 2
    freqs = np.arange(spec.size) * fs / nfft
    stot = float(np.sum(spec))
    lfr = float(np.sum(spec[freqs < LOW_FREQ_CUTOFF_HZ])) / stot if stot > 0 else 0.0
    centroid = float(np.sum(np.arange(len(x)) / fs * sq)) / total if total > 0 else 0.0
    return FeatureBlock({
        "total_log_energy": math.log(max(total, LOG_FLOOR)),
        "low_frequency_ratio": min(max(lfr, 0.0), 1.0),
        "energy_temporal_centroid_s": centroid,
    })


# ---------------------------------------------------------------------------
# assembly


@dataclass(frozen=True)
class FrontEndConfig:
    pre_emphasis: PreEmphasisConfig = field(default_factory=PreEmphasisConfig)
    frame: FrameSpec = field(default_factory=FrameSpec)
    vad: VadConfig = field(default_factory=VadConfig)


def assemble_feature_vector(clip: AudioClip, cfg: FrontEndConfig = FrontEndConfig()) -> FeatureVector:
    """Full chain: pre-emphasis, framing, endpoint detection, then every feature block."""
    emphasized = pre_emphasize(clip.samples, cfg.pre_emphasis)
    seg = detect_endpoints(emphasized, clip.sample_rate_hz, cfg.frame, cfg.vad)
    frames = frame_and_window(emphasized, clip.sample_rate_hz, cfg.frame)
    flags = list(seg.flags)

    pause = pause_features(seg, frames.hop_s, frames.n_frames)
    f0 = frame_f0_for(clip, frames, seg)
    acoustic = acoustic_features(clip, frames, seg, f0=f0)
    flags += acoustic.flags

    rate = frames.sample_rate_hz / frames.hop
    run = _longest_voiced_run(voiced_frame_mask(frames, seg))
    try:
        if run is None:
            raise InsufficientDataError("no voiced run")
        a, b = run
        env = np.sqrt(np.mean(raw_frames(clip, frames)[a:b + 1] ** 2, axis=1))
        tremor = tremor_features(_fill_gaps(f0[a:b + 1]), env, rate)
    except InsufficientDataError:
        tremor = FeatureBlock(dict.fromkeys(TREMOR_NAMES, 0.0))
        flags.append("tremor_insufficient_data")

    energy = energy_features(clip)
    values = np.concatenate([pause.array(), acoustic.array(), tremor.array(), energy.array()])
    if not np.all(np.isfinite(values)):
        values = np.nan_to_num(values, nan=0.0, posinf=0.0, neginf=0.0)
        flags.append("non_finite_replaced")
    return FeatureVector(values, FEATURE_NAMES, tuple(flags))


# ---------------------------------------------------------------------------
# corpus-level table


@dataclass(frozen=True)
class FeatureTable:
    """Feature vectors keyed by (subject_id, segment_id), with subject metadata."""

    vectors: dict[tuple[str, int], np.ndarray]
    subjects: tuple[tuple[str, str, str], ...]  # (subject_id, gender, label)
    names: tuple[str, ...] = FEATURE_NAMES

    def subject_meta(self) -> dict[str, tuple[str, str]]:
        return {sid: (g, lab) for sid, g, lab in self.subjects}

    def to_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        meta = self.subject_meta()
        with path.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["subject_id", "segment_id", "gender", "label", *self.names])
            for sid, _, _ in self.subjects:
                for seg in sorted(s for (s_id, s) in self.vectors if s_id == sid):
                    g, lab = meta[sid]
                    w.writerow([sid, seg, g, lab, *(repr(float(v)) for v in self.vectors[(sid, seg)])])

    @classmethod
    def from_csv(cls, path) -> "FeatureTable":
        with Path(path).open(encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0][:4] != ["subject_id", "segment_id", "gender", "label"]:
            raise SchemaError("feature CSV must start with subject_id,segment_id,gender,label")
        names = tuple(rows[0][4:])
        vectors = {}
        subjects: dict[str, tuple[str, str]] = {}
        for lineno, row in enumerate(rows[1:], start=2):
            if len(row) != len(rows[0]):
                raise SchemaError(f"line {lineno}: expected {len(rows[0])} fields")
            sid, seg, g, lab = row[:4]
            subjects.setdefault(sid, (g, lab))
            vectors[(sid, int(seg))] = np.array([float(v) for v in row[4:]])
        return cls(vectors, tuple((s, g, lab) for s, (g, lab) in subjects.items()), names)


def write_schema(path, names=FEATURE_NAMES) -> None:
    schema = [d for d in feature_schema() if d["name"] in names]
    Path(path).write_text(json.dumps({"dimension": len(schema), "features": schema}, indent=2) + "\n",
                          encoding="utf-8")


def _extract_one(args):
    clip, cfg = args
    return assemble_feature_vector(clip, cfg).values


def extract_corpus_features(corpus: Corpus, cfg: FrontEndConfig = FrontEndConfig(), threads: int | None = None) -> FeatureTable:
    keys = [(s.subject_id, seg) for s in corpus.subjects for seg in sorted(s.segments)]
    values = parallel_map(_extract_one, ((corpus.clip(sid, seg), cfg) for sid, seg in keys), threads)
    return FeatureTable(dict(zip(keys, values)),
                        tuple((s.subject_id, s.gender, s.label) for s in corpus.subjects))
