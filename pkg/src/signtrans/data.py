"""Dataset files, manifests, frame capping and synthetic data generation.

Pose clips live either as JSONL (one 76x3 nested array per line) or in a
packed binary format: magic "PSEQ", version u32, frame count u32, then
T*76*3 little-endian float32 values row-major.  A manifest JSON lists
(id, pose path, translation) per sample; pose paths are relative to the
manifest's directory.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .posenet import NUM_KEYPOINTS, PoseSequence

PSEQ_MAGIC = b"PSEQ"
PSEQ_VERSION = 1


class DataError(ValueError):
    """Raised for malformed manifests or pose files."""


@dataclass
class ManifestEntry:
    sample_id: str
    pose: str
    text: str


@dataclass
class Manifest:
    split: str
    samples: list[ManifestEntry]
    root: Path = field(default_factory=Path)

    def __post_init__(self):
        ids = [s.sample_id for s in self.samples]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})[0]
            raise DataError(f"duplicate sample_id {dup!r} in manifest")

    def __len__(self):
        return len(self.samples)

    def pose_path(self, entry: ManifestEntry) -> Path:
        return self.root / entry.pose

    def save(self, path) -> None:
        payload = {
            "split": self.split,
            "samples": [
                {"id": s.sample_id, "pose": s.pose, "text": s.text} for s in self.samples
            ],
        }
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Manifest":
        path = Path(path)
        payload = json.loads(path.read_text(encoding="utf-8"))
        samples = [ManifestEntry(s["id"], s["pose"], s["text"]) for s in payload["samples"]]
        return cls(split=payload.get("split", "train"), samples=samples, root=path.parent)


# ---------------------------------------------------------------------------
# pose file IO


def write_pose_jsonl(path, seq: PoseSequence) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for frame in seq.frames:
            fh.write(json.dumps(frame.tolist()) + "\n")


def write_pose_pseq(path, seq: PoseSequence) -> None:
    data = seq.frames.astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(PSEQ_MAGIC)
        fh.write(struct.pack("<II", PSEQ_VERSION, seq.frames.shape[0]))
        fh.write(data)


def read_pose(path, sample_id: str = "") -> PoseSequence:
    """Load a pose clip, sniffing the binary magic to pick the format."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DataError(f"sample {sample_id!r}: cannot read pose file {path}: {exc}") from exc
    try:
        if raw[:4] == PSEQ_MAGIC:
            version, t = struct.unpack("<II", raw[4:12])
            if version != PSEQ_VERSION:
                raise DataError(f"unsupported PSEQ version {version}")
            frames = np.frombuffer(raw[12:], dtype="<f4")
            if frames.size != t * NUM_KEYPOINTS * 3:
                raise DataError(f"PSEQ payload has {frames.size} floats, expected {t * NUM_KEYPOINTS * 3}")
            frames = frames.reshape(t, NUM_KEYPOINTS, 3).astype(np.float64)
        else:
            rows = [json.loads(line) for line in raw.decode("utf-8").splitlines() if line.strip()]
            frames = np.asarray(rows, dtype=np.float64)
        return PoseSequence(frames, sample_id)
    except DataError:
        raise
    except Exception as exc:
        raise DataError(f"sample {sample_id!r}: malformed pose file {path}: {exc}") from exc


def subsample_indices(t: int, cap: int) -> np.ndarray:
    """Uniform temporal subsampling indices: floor(i*T/cap + 0.5), clipped."""
    idx = np.floor(np.arange(cap) * (t / cap) + 0.5).astype(np.int64)
    return np.clip(idx, 0, t - 1)


def apply_frame_cap(seq: PoseSequence, cap: int) -> PoseSequence:
    if seq.length <= cap:
        return seq
    return PoseSequence(seq.frames[subsample_indices(seq.length, cap)], seq.sample_id)


def load_dataset(manifest: Manifest, frame_cap: int) -> list[tuple[PoseSequence, str]]:
    """Read every sample in manifest order, enforcing the frame cap."""
    out = []
    for entry in manifest.samples:
        seq = read_pose(manifest.pose_path(entry), entry.sample_id)
        out.append((apply_frame_cap(seq, frame_cap), entry.text))
    return out


# ---------------------------------------------------------------------------
# synthetic data


@dataclass
class SyntheticSpec:
    """Controls for the synthetic concept-motion dataset."""

    n_concepts: int = 8
    min_len: int = 3
    max_len: int = 8
    frames_per_concept: int = 8
    noise_scale: float = 0.01
    words_per_concept: int = 1

    def __post_init__(self):
        if self.n_concepts < 4:
            raise ValueError("need at least 4 concepts")
        if self.noise_scale < 0:
            raise ValueError("noise scale must be non-negative")
        if not 1 <= self.min_len <= self.max_len:
            raise ValueError(f"bad sentence length range [{self.min_len}, {self.max_len}]")
        if self.words_per_concept < 1:
            raise ValueError("words_per_concept must be >= 1")


_SYLLABLES = ["ba", "du", "ki", "lo", "ma", "ne", "po", "ra", "su", "ti", "vo", "wa"]


def concept_words(spec: SyntheticSpec) -> list[list[str]]:
    """Deterministic pseudo-words; each concept owns ``words_per_concept``."""
    out = []
    for k in range(spec.n_concepts):
        base = _SYLLABLES[k % 12] + _SYLLABLES[(k // 12) % 12]
        if spec.n_concepts > 144:
            base += str(k)
        words = [base]
        for j in range(1, spec.words_per_concept):
            words.append(base + _SYLLABLES[j % 12])
        out.append(words)
    return out


def _base_pose() -> np.ndarray:
    xy = np.zeros((NUM_KEYPOINTS, 2))
    # body: nose, eyes, ears, shoulders, elbows
    xy[0] = (0.0, -1.2)
    xy[1], xy[2] = (-0.08, -1.28), (0.08, -1.28)
    xy[3], xy[4] = (-0.18, -1.22), (0.18, -1.22)
    xy[5], xy[6] = (-0.5, -0.9), (0.5, -0.9)
    xy[7], xy[8] = (-0.75, -0.35), (0.75, -0.35)
    # face ring
    angles = 2 * np.pi * np.arange(25) / 25
    xy[9:34, 0] = 0.22 * np.cos(angles)
    xy[9:34, 1] = -1.25 + 0.22 * np.sin(angles)
    # hands: wrist plus 5 fingers x 4 joints
    for base, sign in ((34, -1.0), (55, 1.0)):
        xy[base] = (sign * 0.85, 0.0)
        for finger in range(5):
            for joint in range(4):
                i = base + 1 + 4 * finger + joint
                xy[i] = (sign * (0.75 + 0.05 * finger), 0.08 + 0.07 * joint)
    return xy


_MOTIF_REGIONS = ("left_hand", "right_hand", "face", "body")
_REGION_SLICES = {
    "body": np.arange(0, 9),
    "face": np.arange(9, 34),
    "left_hand": np.arange(34, 55),
    "right_hand": np.arange(55, 76),
}


def concept_motif(k: int, spec: SyntheticSpec) -> np.ndarray:
    """Deterministic (frames_per_concept, 76, 3) block for concept ``k``.

    A region-specific sinusoidal deformation with frequency and phase keyed
    to the concept id; alternating per-point signs keep the deformation
    visible after centroid/scale normalization.  Confidence is 1.
    """
    f = spec.frames_per_concept
    region = _MOTIF_REGIONS[k % 4]
    points = _REGION_SLICES[region]
    if region == "body":
        points = np.array([p for p in points if p not in (5, 6)])  # keep the scale pair still
    freq = 1 + k // 4
    phase = 0.7 * k
    t = np.arange(f)
    wave_x = 0.4 * np.sin(2 * np.pi * freq * t / f + phase)
    wave_y = 0.24 * np.cos(2 * np.pi * freq * t / f + 1.3 * phase)
    signs = np.where(np.arange(points.size) % 2 == 0, 1.0, -1.0)

    frames = np.zeros((f, NUM_KEYPOINTS, 3))
    frames[:, :, :2] = _base_pose()[None, :, :]
    frames[:, :, 2] = 1.0
    frames[:, points, 0] += wave_x[:, None] * signs[None, :]
    frames[:, points, 1] += wave_y[:, None] * signs[None, :]
    return frames


def generate_synthetic(
    spec: SyntheticSpec,
    count: int,
    rng: np.random.Generator,
    out_dir,
    pose_format: str = "jsonl",
) -> Manifest:
    """Write ``count`` samples (poses, manifest, translations TSV) to disk."""
    out_dir = Path(out_dir)
    (out_dir / "poses").mkdir(parents=True, exist_ok=True)
    words = concept_words(spec)
    writer = write_pose_jsonl if pose_format == "jsonl" else write_pose_pseq
    ext = "jsonl" if pose_format == "jsonl" else "pseq"

    entries = []
    tsv_lines = []
    for i in range(count):
        length = int(rng.integers(spec.min_len, spec.max_len + 1))
        concepts = rng.integers(0, spec.n_concepts, size=length)
        frames = np.concatenate([concept_motif(int(k), spec) for k in concepts], axis=0)
        frames[:, :, :2] += rng.normal(scale=spec.noise_scale, size=frames[:, :, :2].shape)
        text = " ".join(w for k in concepts for w in words[int(k)])
        sample_id = f"syn{i:04d}"
        rel = f"poses/{sample_id}.{ext}"
        writer(out_dir / rel, PoseSequence(frames, sample_id))
        entries.append(ManifestEntry(sample_id, rel, text))
        tsv_lines.append(f"{sample_id}\t{text}")

    manifest = Manifest(split="train", samples=entries, root=out_dir)
    manifest.save(out_dir / "manifest.json")
    (out_dir / "translations.tsv").write_text("\n".join(tsv_lines) + "\n", encoding="utf-8")
    return manifest


def read_translations_tsv(path) -> list[tuple[str, str]]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        sample_id, text = line.split("\t", 1)
        out.append((sample_id, text))
    return out
