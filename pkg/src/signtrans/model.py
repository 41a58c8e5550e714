"""The assembled translator: backbone + encoder + decoder (+ anchor table)."""

from __future__ import annotations

import numpy as np

from . import bpe as bpe_mod
from . import ndtensor as nd
from .ccm import CcmConfig, init_ccm_params
from .config import TrainConfig
from .posenet import PoseSequence, SkeletonSpec, backbone_forward, init_backbone_params
from .transformer import (
    DecoderConfig,
    EncodedFeatures,
    EncoderConfig,
    GenerationResult,
    beam_search,
    decode_teacher_forced,
    init_decoder_params,
    init_encoder_params,
    translation_loss,
)


class SignModel:
    """Bundles configuration, skeleton, parameters and the tokenizer."""

    def __init__(self, cfg: TrainConfig, tokenizer: bpe_mod.BpeModel, skeleton: SkeletonSpec,
                 params: dict[str, nd.Tensor]):
        self.cfg = cfg
        self.tokenizer = tokenizer
        self.skeleton = skeleton
        self.params = params
        self.dtype = np.float32 if cfg.precision == "float32" else np.float64
        self.adjacency = nd.Tensor(skeleton.normalized_adjacency().astype(self.dtype))
        self.enc_cfg = EncoderConfig(
            model_dim=cfg.d_visual, heads=cfg.heads, layers=cfg.enc_layers,
            ff_dim=cfg.ff_dim, dropout=cfg.dropout, activation=cfg.activation, use_pe=cfg.pe,
        )
        self.dec_cfg = DecoderConfig(
            model_dim=cfg.embed_dim, vocab_size=tokenizer.size, memory_dim=cfg.d_visual,
            heads=cfg.heads, layers=cfg.dec_layers, ff_dim=cfg.ff_dim,
            dropout=cfg.dropout, activation=cfg.activation, max_positions=cfg.max_target_len,
        )
        self.ccm_cfg = CcmConfig(
            margin=cfg.ccm_margin, weight=cfg.ccm_weight, heads=cfg.ccm_heads,
            hidden=cfg.ccm_hidden, hinge_per_triplet=cfg.hinge_per_triplet,
        )

    @classmethod
    def initialize(cls, cfg: TrainConfig, tokenizer: bpe_mod.BpeModel, skeleton: SkeletonSpec,
                   anchor_embedding: np.ndarray | None = None) -> "SignModel":
        """Fresh parameters from the run seed.

        The anchor table draws from its own stream so backbone/encoder/decoder
        weights are identical whether or not contrastive training is on.
        """
        dtype = np.float32 if cfg.precision == "float32" else np.float64
        rng = np.random.default_rng([cfg.seed, 0])
        params = init_backbone_params(rng, cfg.gcn_channels, cfg.d_visual, skeleton, dtype)
        enc_cfg = EncoderConfig(
            model_dim=cfg.d_visual, heads=cfg.heads, layers=cfg.enc_layers,
            ff_dim=cfg.ff_dim, dropout=cfg.dropout, activation=cfg.activation, use_pe=cfg.pe,
        )
        params.update(init_encoder_params(rng, enc_cfg, dtype))
        dec_cfg = DecoderConfig(
            model_dim=cfg.embed_dim, vocab_size=tokenizer.size, memory_dim=cfg.d_visual,
            heads=cfg.heads, layers=cfg.dec_layers, ff_dim=cfg.ff_dim,
            dropout=cfg.dropout, activation=cfg.activation, max_positions=cfg.max_target_len,
        )
        params.update(init_decoder_params(rng, dec_cfg, dtype))
        if anchor_embedding is not None:
            ccm_rng = np.random.default_rng([cfg.seed, 4])
            ccm_cfg = CcmConfig(margin=cfg.ccm_margin, weight=cfg.ccm_weight,
                                heads=cfg.ccm_heads, hidden=cfg.ccm_hidden)
            params.update(init_ccm_params(ccm_rng, anchor_embedding, cfg.d_visual, ccm_cfg, dtype))
        return cls(cfg, tokenizer, skeleton, params)

    # ------------------------------------------------------------------
    # forward paths

    def encode_sample(self, pose: PoseSequence, train: bool = False,
                      rng: np.random.Generator | None = None,
                      update_backbone: bool = True) -> EncodedFeatures:
        """Backbone then encoder for one clip; all positions are valid.

        With ``update_backbone`` off (non-end-to-end training, or inference)
        the backbone runs without building a graph and contributes no
        gradients.
        """
        if train and update_backbone:
            features = backbone_forward(pose, self.params, self.skeleton, self.adjacency).features
        else:
            with nd.no_grad():
                out = backbone_forward(pose, self.params, self.skeleton, self.adjacency)
            features = nd.Tensor(out.features.data)
        mask = np.ones(features.shape[0], dtype=bool)
        return self._encode_features(features, mask, train, rng)

    def _encode_features(self, features, mask, train, rng):
        from .transformer import encode

        return encode(features, mask, self.params, self.enc_cfg, train=train, rng=rng)

    def target_ids(self, text: str) -> np.ndarray:
        """BOS ... EOS token ids, truncated to the decoder's position capacity."""
        ids = bpe_mod.encode(text, self.tokenizer, add_specials=True)
        if len(ids) > self.cfg.max_target_len:
            ids = ids[: self.cfg.max_target_len - 1] + [bpe_mod.EOS_ID]
        return np.asarray(ids, dtype=np.int64)

    def sample_ce(self, encoded: EncodedFeatures, target_ids: np.ndarray,
                  train: bool = False, rng: np.random.Generator | None = None):
        """Per-sample translation loss and its token count."""
        out = decode_teacher_forced(encoded, target_ids, self.params, self.dec_cfg,
                                    train=train, rng=rng)
        return translation_loss(out.logits, target_ids), len(target_ids) - 1

    def translate(self, pose: PoseSequence, beam_size: int | None = None,
                  max_len: int | None = None) -> str:
        return bpe_mod.decode(self.generate(pose, beam_size, max_len).ids, self.tokenizer)

    def generate(self, pose: PoseSequence, beam_size: int | None = None,
                 max_len: int | None = None) -> GenerationResult:
        beam_size = beam_size or self.cfg.beam_size
        max_len = max_len or self.cfg.max_gen_len
        encoded = self.encode_sample(pose, train=False, update_backbone=False)
        return beam_search(encoded, self.params, self.dec_cfg,
                           beam_size=beam_size, max_len=max_len)

    def trainable_params(self, ccm_active: bool) -> dict[str, nd.Tensor]:
        """Parameters the optimizer may update under the current flags."""
        out = {}
        for name, p in self.params.items():
            if name.startswith("bb.") and not self.cfg.e2e:
                continue
            if name.startswith("ccm.") and not ccm_active:
                continue
            out[name] = p
        return out
