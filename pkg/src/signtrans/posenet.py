"""Visual backbone over pose keypoints.

Input clips are T x 76 x 3 arrays (x, y, confidence) covering upper body,
face and both hands.  The backbone normalizes coordinates, runs graph
convolutions over the skeleton with a learnable per-channel topology
refinement, downsamples time by 4 through two strided multi-scale temporal
convolution blocks, and pools keypoints by region into one feature vector
per output step.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ndtensor as nd

NUM_KEYPOINTS = 76
TCN_KERNELS = (3, 5)


@dataclass
class PoseSequence:
    """A keypoint clip: frames is (T, 76, 3) with confidence in [0, 1]."""

    frames: np.ndarray
    sample_id: str = ""

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 3 or self.frames.shape[1:] != (NUM_KEYPOINTS, 3):
            raise ValueError(
                f"pose clip must be (T, {NUM_KEYPOINTS}, 3), got {self.frames.shape}"
            )
        if self.frames.shape[0] < 1:
            raise ValueError("pose clip needs at least one frame")
        conf = self.frames[:, :, 2]
        if conf.min() < 0.0 or conf.max() > 1.0:
            raise ValueError("confidence channel must lie in [0, 1]")

    @property
    def length(self) -> int:
        return self.frames.shape[0]


@dataclass
class SkeletonSpec:
    """Named keypoint regions (a partition of 0..75) plus skeleton edges."""

    regions: dict[str, list[int]]
    edges: list[tuple[int, int]]
    scale_pair: tuple[int, int] = (5, 6)

    def __post_init__(self):
        seen: set[int] = set()
        for name, idx in self.regions.items():
            dup = seen & set(idx)
            if dup:
                raise ValueError(f"region {name} overlaps another region at {sorted(dup)}")
            seen |= set(idx)
        if seen != set(range(NUM_KEYPOINTS)):
            raise ValueError("regions must partition keypoints 0..75")
        for i, j in self.edges:
            if not (0 <= i < NUM_KEYPOINTS and 0 <= j < NUM_KEYPOINTS):
                raise ValueError(f"edge ({i}, {j}) references an invalid keypoint")

    def save(self, path) -> None:
        payload = {
            "regions": self.regions,
            "edges": [list(e) for e in self.edges],
            "scale_pair": list(self.scale_pair),
        }
        Path(path).write_text(json.dumps(payload, indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "SkeletonSpec":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            regions={k: list(v) for k, v in payload["regions"].items()},
            edges=[tuple(e) for e in payload["edges"]],
            scale_pair=tuple(payload.get("scale_pair", (5, 6))),
        )

    def normalized_adjacency(self) -> np.ndarray:
        """Symmetric-normalized adjacency with self loops, D^-1/2 (A+I) D^-1/2."""
        a = np.eye(NUM_KEYPOINTS)
        for i, j in self.edges:
            a[i, j] = 1.0
            a[j, i] = 1.0
        d = a.sum(axis=1)
        inv_sqrt = 1.0 / np.sqrt(d)
        return a * inv_sqrt[:, None] * inv_sqrt[None, :]


def _hand_edges(base: int) -> list[tuple[int, int]]:
    # 21-point hand: wrist at `base`, then four joints per finger
    edges = []
    for finger in range(5):
        root = base + 1 + 4 * finger
        edges.append((base, root))
        for k in range(3):
            edges.append((root + k, root + k + 1))
    return edges


def default_skeleton() -> SkeletonSpec:
    """Layout used when no skeleton file is supplied.

    Body 0-8 (nose, eyes, ears, shoulders, elbows), face 9-33 as a chain,
    hands 34-54 and 55-75 in the standard 21-point layout.
    """
    body_edges = [(0, 1), (0, 2), (1, 3), (2, 4), (0, 5), (0, 6), (5, 6), (5, 7), (6, 8)]
    face_edges = [(i, i + 1) for i in range(9, 33)] + [(0, 9)]
    connectors = [(7, 34), (8, 55)]
    return SkeletonSpec(
        regions={
            "body": list(range(0, 9)),
            "face": list(range(9, 34)),
            "left_hand": list(range(34, 55)),
            "right_hand": list(range(55, 76)),
        },
        edges=body_edges + face_edges + _hand_edges(34) + _hand_edges(55) + connectors,
    )


@dataclass
class BackboneOutput:
    features: nd.Tensor  # (ceil(T/4), d_visual)
    input_length: int

    def __post_init__(self):
        expected = math.ceil(self.input_length / 4)
        if self.features.shape[0] != expected:
            raise ValueError(
                f"temporal contract broken: T={self.input_length} gives "
                f"{self.features.shape[0]} steps, expected {expected}"
            )


def normalize_pose(seq: PoseSequence, spec: SkeletonSpec, eps: float = 1e-6) -> PoseSequence:
    """Center x, y on the body-region centroid per frame and scale by the
    shoulder-pair distance; confidence passes through untouched."""
    frames = seq.frames.copy()
    body = spec.regions["body"]
    xy = frames[:, :, :2]
    centroid = xy[:, body, :].mean(axis=1, keepdims=True)
    xy = xy - centroid
    left, right = spec.scale_pair
    dist = np.linalg.norm(xy[:, left, :] - xy[:, right, :], axis=1)
    xy = xy / np.maximum(dist, eps)[:, None, None]
    frames[:, :, :2] = xy
    return PoseSequence(frames, seq.sample_id)


def init_gcn_params(rng: np.random.Generator, c_in: int, c_out: int, dtype) -> dict:
    scale = math.sqrt(2.0 / c_in)
    return {
        "refine": nd.Tensor(np.zeros((c_in, NUM_KEYPOINTS, NUM_KEYPOINTS), dtype=dtype), requires_grad=True),
        "weight": nd.Tensor((rng.normal(size=(c_in, c_out)) * scale).astype(dtype), requires_grad=True),
        "bias": nd.Tensor(np.zeros(c_out, dtype=dtype), requires_grad=True),
    }


def gcn_block(x: nd.Tensor, adjacency: nd.Tensor, params: dict) -> nd.Tensor:
    """Per-frame graph convolution: shared normalized adjacency plus a
    learnable per-channel refinement, then pointwise projection and relu."""
    aggregated = nd.matmul(adjacency, x)
    refined = nd.channel_graph_mix(x, params["refine"])
    h = aggregated + refined
    return nd.relu(nd.matmul(h, params["weight"]) + params["bias"])


def init_tcn_params(rng: np.random.Generator, channels: int, dtype) -> dict:
    params = {}
    for k in TCN_KERNELS:
        scale = math.sqrt(2.0 / (k * channels))
        params[f"w{k}"] = nd.Tensor(
            (rng.normal(size=(k, channels, channels)) * scale).astype(dtype), requires_grad=True
        )
        params[f"b{k}"] = nd.Tensor(np.zeros(channels, dtype=dtype), requires_grad=True)
    return params


def tcn_block(x: nd.Tensor, params: dict, stride: int = 2) -> nd.Tensor:
    """Parallel temporal convolutions (kernels 3 and 5, same padding via edge
    replication) summed, with stride 2: output length is ceil(T/2)."""
    t = x.shape[0]
    centers = np.arange(math.ceil(t / stride)) * stride
    branches = []
    for k in TCN_KERNELS:
        pad = (k - 1) // 2
        taps = None
        for j in range(k):
            idx = np.clip(centers + j - pad, 0, t - 1)
            wj = nd.take(params[f"w{k}"], [j], axis=0).reshape(params[f"w{k}"].shape[1:])
            term = nd.matmul(nd.take(x, idx, axis=0), wj)
            taps = term if taps is None else taps + term
        branches.append(taps + params[f"b{k}"])
    return branches[0] + branches[1]


def init_pool_params(rng: np.random.Generator, channels: int, n_regions: int, d_visual: int, dtype) -> dict:
    scale = math.sqrt(1.0 / (n_regions * channels))
    return {
        "weight": nd.Tensor(
            (rng.normal(size=(n_regions * channels, d_visual)) * scale).astype(dtype),
            requires_grad=True,
        ),
        "bias": nd.Tensor(np.zeros(d_visual, dtype=dtype), requires_grad=True),
    }


def region_pool(x: nd.Tensor, spec: SkeletonSpec, params: dict) -> nd.Tensor:
    """Mean over keypoints per region, concatenate, project to d_visual."""
    parts = [nd.take(x, idx, axis=1).mean(axis=1) for idx in spec.regions.values()]
    return nd.matmul(nd.concat(parts, axis=1), params["weight"]) + params["bias"]


def init_backbone_params(
    rng: np.random.Generator, gcn_channels: tuple[int, int, int], d_visual: int, spec: SkeletonSpec, dtype
) -> dict[str, nd.Tensor]:
    c1, c2, c3 = gcn_channels
    params = {}
    for name, block in {
        "g1": init_gcn_params(rng, 3, c1, dtype),
        "g2": init_gcn_params(rng, c1, c2, dtype),
        "g3": init_gcn_params(rng, c2, c3, dtype),
        "t1": init_tcn_params(rng, c2, dtype),
        "t2": init_tcn_params(rng, c3, dtype),
        "pool": init_pool_params(rng, c3, len(spec.regions), d_visual, dtype),
    }.items():
        for key, tensor in block.items():
            params[f"bb.{name}.{key}"] = tensor
    return params


def _sub(params: dict, prefix: str) -> dict:
    plen = len(prefix) + 1
    return {k[plen:]: v for k, v in params.items() if k.startswith(prefix + ".")}


def backbone_forward(
    seq: PoseSequence, params: dict, spec: SkeletonSpec, adjacency: nd.Tensor
) -> BackboneOutput:
    """normalize -> gcn x2 -> tcn(/2) -> gcn -> tcn(/2) -> region pool."""
    normalized = normalize_pose(seq, spec)
    x = nd.Tensor(normalized.frames.astype(adjacency.dtype))
    x = gcn_block(x, adjacency, _sub(params, "bb.g1"))
    x = gcn_block(x, adjacency, _sub(params, "bb.g2"))
    x = tcn_block(x, _sub(params, "bb.t1"))
    x = gcn_block(x, adjacency, _sub(params, "bb.g3"))
    x = tcn_block(x, _sub(params, "bb.t2"))
    features = region_pool(x, spec, _sub(params, "bb.pool"))
    return BackboneOutput(features=features, input_length=seq.length)
