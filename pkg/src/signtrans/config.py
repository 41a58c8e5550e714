"""Training configuration: every knob the pipeline honours, serializable."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict


@dataclass
class TrainConfig:
    # optimization
    seed: int = 0
    precision: str = "float32"
    learning_rate: float = 3e-4
    warmup_steps: int = 1000
    epochs: int = 10
    batch_size: int = 8
    weight_decay: float = 0.01
    grad_clip: float = 1.0
    early_stop_ce: float | None = None
    # data handling
    frame_cap: int = 512
    max_target_len: int = 128
    bpe_vocab_size: int = 4000
    # model dimensions
    embed_dim: int = 768
    d_visual: int = 1024
    heads: int = 4
    enc_layers: int = 4
    dec_layers: int = 4
    ff_dim: int = 1024
    dropout: float = 0.1
    activation: str = "relu"
    gcn_channels: tuple = (32, 32, 64)
    # anchor mining and contrastive supervision
    anchor_preset: str = "VN"
    anchor_min_count: int = 10
    anchor_max_doc_fraction: float = 0.9
    d_ca: int = 300
    ccm_weight: float = 1.0
    ccm_margin: float = 0.4
    ccm_heads: int = 4
    ccm_hidden: int = 64
    hinge_per_triplet: bool = False
    # ablation flags
    e2e: bool = True
    pe: bool = True
    ccm: bool = True
    # generation
    beam_size: int = 5
    max_gen_len: int = 32
    # resources
    skeleton_path: str | None = None

    def __post_init__(self):
        if self.precision not in ("float32", "float64"):
            raise ValueError(f"precision must be float32 or float64, got {self.precision}")
        if self.activation not in ("relu", "gelu"):
            raise ValueError(f"activation must be relu or gelu, got {self.activation}")
        if self.anchor_preset not in ("V", "N", "VN", "VNA"):
            raise ValueError(f"unknown anchor preset {self.anchor_preset}")
        for name in ("learning_rate", "epochs", "batch_size", "frame_cap", "max_target_len",
                     "embed_dim", "d_visual", "heads", "ff_dim", "ccm_margin", "beam_size",
                     "max_gen_len", "bpe_vocab_size", "d_ca", "ccm_heads", "ccm_hidden"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("warmup_steps", "weight_decay", "grad_clip", "ccm_weight", "dropout",
                     "enc_layers", "dec_layers", "anchor_min_count"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.embed_dim % self.heads or self.d_visual % self.heads:
            raise ValueError("embed_dim and d_visual must be divisible by heads")
        self.gcn_channels = tuple(int(c) for c in self.gcn_channels)
        if len(self.gcn_channels) != 3 or any(c <= 0 for c in self.gcn_channels):
            raise ValueError(f"gcn_channels must be three positive sizes, got {self.gcn_channels}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gcn_channels"] = list(self.gcn_channels)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        return cls.from_dict(json.loads(text))
