"""Signal conditioning: pre-emphasis, framing/windowing, frame descriptors and endpoint detection."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import EmptyInputError, TooShortError, ValidationError


@dataclass(frozen=True)
class PreEmphasisConfig:
    mu: float = 0.97

    def __post_init__(self):
        if not 0.0 <= self.mu < 1.0:
            raise ValidationError("pre-emphasis mu must lie in [0, 1)")


@dataclass(frozen=True)
class FrameSpec:
    frame_ms: float = 25.0
    hop_ms: float = 10.0
    window: str = "hamming"

    def __post_init__(self):
        if not 0 < self.hop_ms <= self.frame_ms:
            raise ValidationError("need 0 < hop_ms <= frame_ms")
        if self.window not in ("hamming", "rectangular"):
            raise ValidationError(f"unknown window {self.window!r}")

    def frame_len(self, fs: int) -> int:
        return int(math.floor(self.frame_ms * fs / 1000.0 + 1e-9))

    def hop(self, fs: int) -> int:
        return max(1, int(math.floor(self.hop_ms * fs / 1000.0 + 1e-9)))


@dataclass(frozen=True)
class FrameSequence:
    frames: np.ndarray
    frame_len: int
    hop: int
    sample_rate_hz: int
    too_short: bool = False

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def hop_s(self) -> float:
        return self.hop / self.sample_rate_hz

    def centers_s(self) -> np.ndarray:
        return (np.arange(self.n_frames) * self.hop + self.frame_len / 2.0) / self.sample_rate_hz


@dataclass(frozen=True)
class VadConfig:
    energy_high_factor: float = 4.0
    energy_low_factor: float = 2.0
    zcr_threshold_factor: float = 1.5
    min_voiced_ms: float = 100.0
    min_pause_ms: float = 200.0
    noise_window_ms: float = 100.0

    def __post_init__(self):
        if self.energy_low_factor <= 0 or self.energy_high_factor <= 0 or self.zcr_threshold_factor <= 0:
            raise ValidationError("VAD factors must be positive")
        if self.energy_low_factor > self.energy_high_factor:
            raise ValidationError("energy_low_factor must not exceed energy_high_factor")


@dataclass(frozen=True)
class Interval:
    start_s: float
    end_s: float
    kind: str

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class Segmentation:
    total_duration_s: float
    intervals: tuple[Interval, ...]
    reaction_time_s: float
    flags: tuple[str, ...] = field(default=())

    def voiced(self) -> list[Interval]:
        return [iv for iv in self.intervals if iv.kind == "voiced"]

    def pauses(self) -> list[Interval]:
        """Silent intervals bounded by voiced speech on both sides."""
        ivs = self.intervals
        return [iv for i, iv in enumerate(ivs)
                if iv.kind == "silent" and 0 < i < len(ivs) - 1]

    def to_dict(self) -> dict:
        return {
            "total_duration_s": self.total_duration_s,
            "reaction_time_s": self.reaction_time_s,
            "intervals": [{"start_s": iv.start_s, "end_s": iv.end_s, "kind": iv.kind} for iv in self.intervals],
            "flags": list(self.flags),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "Segmentation":
        ivs = tuple(Interval(float(i["start_s"]), float(i["end_s"]), i["kind"]) for i in d["intervals"])
        return cls(float(d["total_duration_s"]), ivs, float(d["reaction_time_s"]), tuple(d.get("flags", ())))

    @classmethod
    def from_durations(cls, spans: list[tuple[str, float]]) -> "Segmentation":
        """Build a tiling from ``[(kind, duration), ...]``; handy for hand-specified cases."""
        t = 0.0
        ivs = []
        for kind, dur in spans:
            ivs.append(Interval(t, t + dur, kind))
            t += dur
        first = next((iv.start_s for iv in ivs if iv.kind == "voiced"), t)
        flags = () if any(iv.kind == "voiced" for iv in ivs) else ("all_silent",)
        return cls(t, tuple(ivs), first, flags)


def pre_emphasize(signal, cfg: PreEmphasisConfig = PreEmphasisConfig()) -> np.ndarray:
    x = np.asarray(signal, dtype=np.float64)
    if x.size == 0:
        raise EmptyInputError("cannot pre-emphasize an empty signal")
    y = x.copy()
    y[1:] = x[1:] - cfg.mu * x[:-1]
    return y


def hamming_window(n: int) -> np.ndarray:
    if n < 2:
        raise ValidationError("Hamming window needs N >= 2")
    k = np.arange(n)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * k / (n - 1))


def frame_and_window(signal, fs: int, spec: FrameSpec = FrameSpec()) -> FrameSequence:
    x = np.asarray(signal, dtype=np.float64)
    flen, hop = spec.frame_len(fs), spec.hop(fs)
    if flen < 2:
        raise ValidationError("frame shorter than two samples")
    if len(x) < flen:
        return FrameSequence(np.zeros((0, flen)), flen, hop, fs, too_short=True)
    raw = sliding_window_view(x, flen)[::hop]
    if spec.window == "hamming":
        frames = raw * hamming_window(flen)
    else:
        frames = raw.copy()
    return FrameSequence(frames, flen, hop, fs)


def short_time_energy(frames: FrameSequence) -> np.ndarray:
    return np.sum(frames.frames ** 2, axis=1)


def zero_crossing_rate(frames: FrameSequence) -> np.ndarray:
    positive = frames.frames >= 0.0
    changes = np.count_nonzero(positive[:, 1:] != positive[:, :-1], axis=1)
    return changes / (frames.frame_len - 1)


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Inclusive (first, last) index pairs of consecutive True runs."""
    if not mask.any():
        return []
    padded = np.concatenate([[False], mask, [False]]).astype(np.int8)
    d = np.diff(padded)
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1) - 1
    return list(zip(starts.tolist(), ends.tolist()))


def detect_endpoints(signal, fs: int, frame: FrameSpec = FrameSpec(), vad: VadConfig = VadConfig()) -> Segmentation:
    """Double-threshold energy/ZCR endpoint detection.

    Thresholds are multiples of the energy and ZCR measured over the leading
    ``noise_window_ms``, so decisions are invariant to amplitude scaling.
    Voiced runs shorter than ``min_voiced_ms`` become silence, then inner
    silences shorter than ``min_pause_ms`` are absorbed into the speech
    around them.
    """
    x = np.asarray(signal, dtype=np.float64)
    total = len(x) / fs
    if total < 0.2:
        raise TooShortError(f"signal is {total * 1000:.1f} ms, endpoint detection needs >= 200 ms")
    fr = frame_and_window(x, fs, frame)
    hop_s = fr.hop / fs
    if vad.min_voiced_ms / 1000.0 < hop_s or vad.min_pause_ms / 1000.0 < hop_s:
        raise ValidationError("VAD minimum durations must be at least one hop")

    energy = short_time_energy(fr)
    zcr = zero_crossing_rate(fr)
    noise_len = int(vad.noise_window_ms * fs / 1000.0)
    n_noise = max(1, (noise_len - fr.frame_len) // fr.hop + 1) if noise_len >= fr.frame_len else 1
    floor = max(float(np.mean(energy[:n_noise])), 1e-10 * float(energy.max()))
    high = vad.energy_high_factor * floor
    low = vad.energy_low_factor * floor
    zth = vad.zcr_threshold_factor * float(np.mean(zcr[:n_noise]))

    seeds = energy > high
    extendable = (energy > low) | (zcr > zth) | seeds
    voiced_runs = [(a, b) for a, b in _runs(extendable) if seeds[a:b + 1].any()]

    # First voiced frame holds speech only in its tail, last one only in its head.
    spans = []
    for a, b in voiced_runs:
        start = (a * fr.hop + fr.frame_len - fr.hop / 2.0) / fs
        end = (b * fr.hop + fr.hop / 2.0) / fs
        start, end = max(0.0, start), min(total, end)
        if end - start >= vad.min_voiced_ms / 1000.0:
            spans.append([start, end])

    merged: list[list[float]] = []
    for s, e in spans:
        if merged and s - merged[-1][1] < vad.min_pause_ms / 1000.0:
            merged[-1][1] = e
        else:
            merged.append([s, e])

    intervals = []
    t = 0.0
    for s, e in merged:
        if s > t:
            intervals.append(Interval(t, s, "silent"))
        intervals.append(Interval(s, e, "voiced"))
        t = e
    if t < total:
        intervals.append(Interval(t, total, "silent"))

    if not merged:
        return Segmentation(total, tuple(intervals), total, ("all_silent",))
    return Segmentation(total, tuple(intervals), merged[0][0])
