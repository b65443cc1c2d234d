"""Corpus ingest (manifest CSV + RIFF/WAVE PCM) and the seeded synthetic cohort generator."""

from __future__ import annotations

import csv
import dataclasses
import functools
import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConfigurationError,
    CorruptFileError,
    DuplicateEntryError,
    ManifestParseError,
    UnsupportedFormatError,
    ValidationError,
)

N_SEGMENTS = 29
SEGMENT_IDS = tuple(range(1, N_SEGMENTS + 1))
GENDERS = ("male", "female")
LABELS = ("healthy", "depressed")
PARADIGMS = ("interview", "passage_reading", "vocabulary_reading", "picture_description")
MANIFEST_HEADER = ("subject_id", "gender", "label", "segment_id", "wav_path")


@dataclass(frozen=True)
class SegmentDescriptor:
    segment_id: int
    paradigm: str
    valence: str


def _build_taxonomy() -> tuple[SegmentDescriptor, ...]:
    # 1-18 interview (positive/neutral/negative blocks of six), 19 passage,
    # 20-25 word lists (two per valence), 26-29 pictures (three affective + one TAT).
    out = []
    for i in range(18):
        out.append(SegmentDescriptor(i + 1, "interview", ("positive", "neutral", "negative")[i // 6]))
    out.append(SegmentDescriptor(19, "passage_reading", "none"))
    for i, val in enumerate(("positive", "positive", "neutral", "neutral", "negative", "negative")):
        out.append(SegmentDescriptor(20 + i, "vocabulary_reading", val))
    for i, val in enumerate(("positive", "neutral", "negative", "none")):
        out.append(SegmentDescriptor(26 + i, "picture_description", val))
    return tuple(out)


SEGMENT_TAXONOMY = _build_taxonomy()
PASSAGE_SEGMENT_ID = next(d.segment_id for d in SEGMENT_TAXONOMY if d.paradigm == "passage_reading")


def segments_of(paradigm: str) -> list[int]:
    return [d.segment_id for d in SEGMENT_TAXONOMY if d.paradigm == paradigm]


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate_hz: int
    bit_depth_source: int = 16
    source: str = ""

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise ValidationError("sample_rate_hz must be positive")
        if len(self.samples) == 0:
            raise ValidationError("audio clip is empty")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass(frozen=True)
class SubjectRecord:
    subject_id: str
    gender: str
    label: str
    segments: dict[int, str] = field(default_factory=dict)

    @property
    def y(self) -> int:
        """Classifier label: +1 healthy, -1 depressed."""
        return 1 if self.label == "healthy" else -1


@dataclass(frozen=True)
class Corpus:
    subjects: tuple[SubjectRecord, ...]
    descriptors: tuple[SegmentDescriptor, ...] = SEGMENT_TAXONOMY
    clips: dict[tuple[str, int], AudioClip] = field(default_factory=dict, compare=False, repr=False)
    root: Path | None = None

    def subject(self, subject_id: str) -> SubjectRecord:
        for s in self.subjects:
            if s.subject_id == subject_id:
                return s
        raise KeyError(subject_id)

    def clip(self, subject_id: str, segment_id: int) -> AudioClip:
        key = (subject_id, segment_id)
        if key in self.clips:
            return self.clips[key]
        ref = self.subject(subject_id).segments[segment_id]
        path = Path(ref)
        if not path.is_absolute() and self.root is not None:
            path = self.root / path
        return load_wav(path)

    def group_counts(self) -> dict[tuple[str, str], int]:
        counts = {(g, lab): 0 for g in GENDERS for lab in LABELS}
        for s in self.subjects:
            counts[(s.gender, s.label)] += 1
        return counts


# ---------------------------------------------------------------------------
# manifest


def load_manifest(path) -> Corpus:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ManifestParseError(1, "missing header") from None
    if tuple(h.strip() for h in header) != MANIFEST_HEADER:
        raise ManifestParseError(1, f"header must be {','.join(MANIFEST_HEADER)}")

    order: list[str] = []
    meta: dict[str, tuple[str, str]] = {}
    segs: dict[str, dict[int, str]] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(MANIFEST_HEADER):
            raise ManifestParseError(lineno, f"expected {len(MANIFEST_HEADER)} fields, got {len(row)}")
        sid, gender, label, seg_txt, wav = (c.strip() for c in row)
        if not sid:
            raise ManifestParseError(lineno, "empty subject_id")
        try:
            seg = int(seg_txt)
        except ValueError:
            raise ManifestParseError(lineno, f"segment_id {seg_txt!r} is not an integer") from None
        if gender not in GENDERS:
            raise ValidationError(f"line {lineno}: unknown gender {gender!r}")
        if label not in LABELS:
            raise ValidationError(f"line {lineno}: unknown label {label!r}")
        if not 1 <= seg <= N_SEGMENTS:
            raise ValidationError(f"line {lineno}: segment_id {seg} outside 1..{N_SEGMENTS}")
        if sid in meta:
            if meta[sid] != (gender, label):
                raise ValidationError(f"line {lineno}: subject {sid} has inconsistent gender/label")
        else:
            meta[sid] = (gender, label)
            order.append(sid)
            segs[sid] = {}
        if seg in segs[sid]:
            raise DuplicateEntryError(f"line {lineno}: duplicate (subject_id, segment_id) = ({sid}, {seg})")
        segs[sid][seg] = wav

    subjects = tuple(
        SubjectRecord(sid, meta[sid][0], meta[sid][1], dict(sorted(segs[sid].items()))) for sid in order
    )
    return Corpus(subjects=subjects, root=path.parent)


def write_manifest(corpus: Corpus, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_HEADER)
        for s in corpus.subjects:
            for seg, ref in sorted(s.segments.items()):
                w.writerow([s.subject_id, s.gender, s.label, seg, ref])


# ---------------------------------------------------------------------------
# WAV

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


def load_wav(path) -> AudioClip:
    """Read a mono 16/24-bit PCM RIFF/WAVE file, scaling integers by 2**(bits-1)."""
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise UnsupportedFormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack("<I", data[pos + 4:pos + 8])
        body = data[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise CorruptFileError(f"{path}: chunk {cid!r} truncated ({len(body)} of {size} bytes)")
        if cid == b"fmt ":
            fmt = body
        elif cid == b"data":
            payload = body
            break
        pos += 8 + size + (size & 1)
    if fmt is None or len(fmt) < 16:
        raise CorruptFileError(f"{path}: missing fmt chunk")
    if payload is None:
        raise CorruptFileError(f"{path}: missing data chunk")

    tag, channels, rate, _, block_align, bits = struct.unpack("<HHIIHH", fmt[:16])
    if tag == _WAVE_FORMAT_EXTENSIBLE and len(fmt) >= 26:
        (tag,) = struct.unpack("<H", fmt[24:26])
    if tag != _WAVE_FORMAT_PCM:
        raise UnsupportedFormatError(f"{path}: format tag {tag:#06x} is not PCM")
    if channels != 1:
        raise UnsupportedFormatError(f"{path}: {channels} channels, only mono is supported")
    if bits not in (16, 24):
        raise UnsupportedFormatError(f"{path}: {bits}-bit samples, only 16 and 24 are supported")
    width = bits // 8
    if len(payload) % width:
        raise CorruptFileError(f"{path}: data chunk is not a whole number of samples")
    if not payload:
        raise CorruptFileError(f"{path}: data chunk holds no samples")

    if bits == 16:
        ints = np.frombuffer(payload, dtype="<i2").astype(np.int32)
    else:
        raw = np.frombuffer(payload, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        ints = raw[:, 0] | (raw[:, 1] << 8) | (raw[:, 2] << 16)
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
    samples = ints.astype(np.float64) / float(1 << (bits - 1))
    return AudioClip(samples, rate, bits, source=str(path))


def write_wav(path, samples, sample_rate_hz: int, bits: int = 16) -> None:
    if bits not in (16, 24):
        raise UnsupportedFormatError(f"cannot write {bits}-bit PCM")
    scale = float(1 << (bits - 1))
    ints = np.clip(np.round(np.asarray(samples, dtype=np.float64) * scale), -scale, scale - 1).astype(np.int32)
    if bits == 16:
        payload = ints.astype("<i2").tobytes()
    else:
        u = (ints & 0xFFFFFF).astype(np.uint32)
        payload = np.stack([u & 0xFF, (u >> 8) & 0xFF, (u >> 16) & 0xFF], axis=1).astype(np.uint8).tobytes()
    width = bits // 8
    fmt = struct.pack("<HHIIHH", _WAVE_FORMAT_PCM, 1, sample_rate_hz, sample_rate_hz * width, width, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        body += b"\x00"
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)


# ---------------------------------------------------------------------------
# synthetic cohort

# Interview items 6 and 11, the passage, one word list and one picture carry the class signal.
DEFAULT_INFORMATIVE = (6, 11, 19, 22, 27)


def default_discriminability() -> tuple[float, ...]:
    return tuple(1.0 if s in DEFAULT_INFORMATIVE else 0.0 for s in SEGMENT_IDS)


@dataclass(frozen=True)
class SynthSpec:
    """Cohort shape and class effects for :func:`generate_synthetic_corpus`.

    Effects apply to depressed subjects only, scaled per segment by
    ``discriminability`` (0 = both classes drawn from the same distribution).
    """

    n_healthy: int = 29
    n_depressed: int = 23
    n_male_healthy: int = 20
    n_male_depressed: int = 16
    n_female_healthy: int = 9
    n_female_depressed: int = 7
    sample_rate_hz: int = 16000
    pause_shift_s: float = 0.4
    speech_rate_shift: float = 0.15
    f0_shift_hz: float = -15.0
    tremor_depth_shift: float = 0.08
    discriminability: tuple[float, ...] = field(default_factory=default_discriminability)
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_male_healthy + self.n_female_healthy != self.n_healthy:
            raise ConfigurationError("male + female healthy counts must equal n_healthy")
        if self.n_male_depressed + self.n_female_depressed != self.n_depressed:
            raise ConfigurationError("male + female depressed counts must equal n_depressed")
        if min(self.n_male_healthy, self.n_male_depressed, self.n_female_healthy, self.n_female_depressed) < 0:
            raise ConfigurationError("group counts must be non-negative")
        if len(self.discriminability) != N_SEGMENTS:
            raise ConfigurationError(f"discriminability needs {N_SEGMENTS} entries")
        if any(not 0.0 <= d <= 1.0 for d in self.discriminability):
            raise ConfigurationError("discriminability entries must lie in [0, 1]")
        if self.sample_rate_hz < 8000:
            raise ConfigurationError("sample_rate_hz must be at least 8000")

    @classmethod
    def strong(cls, rng_seed: int = 0, **kw) -> "SynthSpec":
        return cls(pause_shift_s=0.8, speech_rate_shift=0.3, f0_shift_hz=-25.0,
                   tremor_depth_shift=0.15, rng_seed=rng_seed, **kw)

    @classmethod
    def null(cls, rng_seed: int = 0, **kw) -> "SynthSpec":
        return cls(pause_shift_s=0.0, speech_rate_shift=0.0, f0_shift_hz=0.0,
                   tremor_depth_shift=0.0, rng_seed=rng_seed, **kw)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["discriminability"] = list(self.discriminability)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known - {"preset"}
        if unknown:
            raise ConfigurationError(f"unknown SynthSpec fields: {sorted(unknown)}")
        kw = {k: v for k, v in d.items() if k != "preset"}
        if "discriminability" in kw:
            kw["discriminability"] = tuple(float(v) for v in kw["discriminability"])
        preset = d.get("preset")
        if preset is None:
            return cls(**kw)
        if preset not in ("strong", "null", "default"):
            raise ConfigurationError(f"unknown preset {preset!r}")
        base = {"strong": cls.strong, "null": cls.null, "default": cls}[preset]()
        return dataclasses.replace(base, **kw)

    @classmethod
    def from_json(cls, path) -> "SynthSpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _subject_params(spec: SynthSpec, index: int, gender: str) -> dict:
    rng = np.random.default_rng(np.random.SeedSequence([spec.rng_seed, index]))
    f0 = rng.normal(120.0, 15.0) if gender == "male" else rng.normal(210.0, 20.0)
    return {
        "f0": float(np.clip(f0, 80.0, 300.0)),
        "rate": float(rng.uniform(0.85, 1.15)),
        "tremor_hz": float(rng.uniform(13.0, 17.0)),
        "tremor_depth": float(rng.uniform(0.02, 0.06)),
        "level": float(rng.uniform(0.7, 1.3)),
    }


_TABLE_SIZE = 4096


@functools.lru_cache(maxsize=None)
def _wavetable(n_harm: int) -> tuple[np.ndarray, np.ndarray]:
    """One period of a band-limited 1/k harmonic series."""
    grid = np.linspace(0.0, 2 * np.pi, _TABLE_SIZE + 1)
    k = np.arange(1, n_harm + 1)
    return grid, (np.sin(np.outer(grid, k)) / k).sum(axis=1) / 2.0


def _burst(rng, n: int, fs: int, f0: float, amp: float, depth: float, tremor_hz: float) -> np.ndarray:
    t = np.arange(n) / fs
    drift = 1.0 + 0.01 * np.sin(2 * np.pi * rng.uniform(0.3, 0.8) * t + rng.uniform(0, 2 * np.pi))
    phase = 2 * np.pi * np.cumsum(f0 * drift) / fs
    n_harm = max(1, int(min(3500.0, 0.45 * fs) // (f0 * 1.02)))
    grid, table = _wavetable(n_harm)
    wave = np.interp(np.mod(phase, 2 * np.pi), grid, table)
    env = 1.0 + depth * np.sin(2 * np.pi * tremor_hz * t + rng.uniform(0, 2 * np.pi))
    ramp = min(int(0.02 * fs), n // 2)
    if ramp > 0:
        r = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        env[:ramp] *= r
        env[n - ramp:] *= r[::-1]
    return amp * env * wave


def _synth_clip(spec: SynthSpec, params: dict, depressed: bool, subject_index: int, segment_id: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([spec.rng_seed, subject_index, segment_id]))
    fs = spec.sample_rate_hz
    e = spec.discriminability[segment_id - 1] if depressed else 0.0

    reaction = rng.uniform(0.3, 0.7) + 0.5 * e * spec.pause_shift_s
    n_bursts = int(rng.integers(3, 5))
    rate = params["rate"] * (1.0 + e * spec.speech_rate_shift)
    f0 = params["f0"] + e * spec.f0_shift_hz + rng.normal(0.0, 3.0)
    depth = params["tremor_depth"] + e * spec.tremor_depth_shift
    amp = 0.25 * params["level"] * rng.uniform(0.8, 1.2)

    pieces = [np.zeros(int(round(reaction * fs)))]
    for b in range(n_bursts):
        dur = rng.uniform(0.7, 1.4) * rate
        pieces.append(_burst(rng, int(round(dur * fs)), fs, f0 * rng.uniform(0.97, 1.03), amp, depth,
                             params["tremor_hz"]))
        if b < n_bursts - 1:
            gap = rng.uniform(0.25, 0.6) + e * spec.pause_shift_s
            pieces.append(np.zeros(int(round(gap * fs))))
    pieces.append(np.zeros(int(round(rng.uniform(0.2, 0.4) * fs))))
    x = np.concatenate(pieces)
    x += rng.normal(0.0, 1e-3, size=len(x))
    return np.clip(x, -1.0, 1.0)


def generate_synthetic_corpus(spec: SynthSpec) -> Corpus:
    groups = (
        ("male", "healthy", spec.n_male_healthy),
        ("female", "healthy", spec.n_female_healthy),
        ("male", "depressed", spec.n_male_depressed),
        ("female", "depressed", spec.n_female_depressed),
    )
    subjects = []
    clips = {}
    index = 0
    for gender, label, count in groups:
        for _ in range(count):
            sid = f"S{index + 1:03d}"
            params = _subject_params(spec, index, gender)
            segs = {}
            for seg in SEGMENT_IDS:
                x = _synth_clip(spec, params, label == "depressed", index, seg)
                clips[(sid, seg)] = AudioClip(x, spec.sample_rate_hz, 16, source=f"synthetic:{sid}/{seg}")
                segs[seg] = f"wavs/{sid}_{seg:02d}.wav"
            subjects.append(SubjectRecord(sid, gender, label, segs))
            index += 1
    return Corpus(subjects=tuple(subjects), clips=clips)


def materialize_wavs(corpus: Corpus, out_dir) -> Path:
    """Write every in-memory clip as 16-bit WAV plus ``manifest.csv``; returns the manifest path."""
    out_dir = Path(out_dir)
    for s in corpus.subjects:
        for seg, ref in s.segments.items():
            clip = corpus.clip(s.subject_id, seg)
            write_wav(out_dir / ref, clip.samples, clip.sample_rate_hz, 16)
    manifest = out_dir / "manifest.csv"
    write_manifest(corpus, manifest)
    return manifest
