"""Visual-to-text transformer encoder, causal text decoder, beam search.

The encoder maps backbone features (plus fixed sinusoidal position encoding)
into the context space the decoder cross-attends to.  The decoder is
auto-regressive with learned positional embeddings and ties its output
projection to the word embedding matrix.  Layers are pre-norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ndtensor as nd
from .bpe import BOS_ID, EOS_ID, PAD_ID

MASK_VALUE = -1e30  # additive attention mask; exp() underflows to exactly 0


@dataclass
class EncoderConfig:
    model_dim: int
    heads: int = 4
    layers: int = 4
    ff_dim: int = 1024
    dropout: float = 0.1
    activation: str = "relu"
    use_pe: bool = True

    def __post_init__(self):
        if self.model_dim % self.heads:
            raise ValueError(f"model_dim {self.model_dim} not divisible by {self.heads} heads")


@dataclass
class DecoderConfig:
    model_dim: int
    vocab_size: int
    memory_dim: int
    heads: int = 4
    layers: int = 4
    ff_dim: int = 1024
    dropout: float = 0.1
    activation: str = "relu"
    max_positions: int = 128

    def __post_init__(self):
        if self.model_dim % self.heads:
            raise ValueError(f"model_dim {self.model_dim} not divisible by {self.heads} heads")


@dataclass
class EncodedFeatures:
    tokens: nd.Tensor  # (L_enc, dim)
    pad_mask: np.ndarray  # (L_enc,) bool; True = valid position


@dataclass
class DecoderOutput:
    states: nd.Tensor  # (L, model_dim)
    logits: nd.Tensor  # (L, vocab)


@dataclass
class GenerationResult:
    ids: list[int]
    logps: list[float]
    score: float


def sinusoidal_pe(length: int, dim: int, dtype=np.float64) -> np.ndarray:
    """Interleaved sin/cos position encoding with 10000^(2i/dim) frequencies."""
    if dim % 2:
        raise ValueError(f"position encoding dim must be even, got {dim}")
    pos = np.arange(length, dtype=np.float64)[:, None]
    inv = np.exp(-math.log(10000.0) * np.arange(0, dim, 2, dtype=np.float64) / dim)
    pe = np.empty((length, dim))
    pe[:, 0::2] = np.sin(pos * inv)
    pe[:, 1::2] = np.cos(pos * inv)
    return pe.astype(dtype)


def _linear_init(rng, d_in, d_out, dtype):
    bound = math.sqrt(1.0 / d_in)
    return nd.Tensor(rng.uniform(-bound, bound, size=(d_in, d_out)).astype(dtype), requires_grad=True)


def _zeros(shape, dtype):
    return nd.Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)


def _ones(shape, dtype):
    return nd.Tensor(np.ones(shape, dtype=dtype), requires_grad=True)


def _attention_params(rng, d_q, d_kv, d_model, dtype):
    return {
        "wq": _linear_init(rng, d_q, d_model, dtype),
        "bq": _zeros(d_model, dtype),
        "wk": _linear_init(rng, d_kv, d_model, dtype),
        "bk": _zeros(d_model, dtype),
        "wv": _linear_init(rng, d_kv, d_model, dtype),
        "bv": _zeros(d_model, dtype),
        "wo": _linear_init(rng, d_model, d_model, dtype),
        "bo": _zeros(d_model, dtype),
    }


def _ffn_params(rng, d_model, ff_dim, dtype):
    return {
        "w1": _linear_init(rng, d_model, ff_dim, dtype),
        "b1": _zeros(ff_dim, dtype),
        "w2": _linear_init(rng, ff_dim, d_model, dtype),
        "b2": _zeros(d_model, dtype),
    }


def _heads_split(x: nd.Tensor, heads: int) -> nd.Tensor:
    length, dim = x.shape
    return nd.transpose(x.reshape((length, heads, dim // heads)), (1, 0, 2))


def multi_head_attention(
    query: nd.Tensor,
    memory: nd.Tensor,
    params: dict,
    heads: int,
    mask_add: np.ndarray | None = None,
) -> nd.Tensor:
    """Scaled dot-product attention; ``mask_add`` is added to the score matrix."""
    q = _heads_split(nd.matmul(query, params["wq"]) + params["bq"], heads)
    k = _heads_split(nd.matmul(memory, params["wk"]) + params["bk"], heads)
    v = _heads_split(nd.matmul(memory, params["wv"]) + params["bv"], heads)
    scores = nd.scale(nd.matmul(q, nd.transpose(k, (0, 2, 1))), 1.0 / math.sqrt(q.shape[-1]))
    if mask_add is not None:
        scores = scores + nd.Tensor(mask_add[None, :, :].astype(scores.dtype))
    attn = nd.softmax(scores, axis=-1)
    ctx = nd.matmul(attn, v)
    lq = query.shape[0]
    merged = nd.transpose(ctx, (1, 0, 2)).reshape((lq, heads * q.shape[-1]))
    return nd.matmul(merged, params["wo"]) + params["bo"]


def _ffn(x: nd.Tensor, params: dict, activation: str) -> nd.Tensor:
    h = nd.matmul(x, params["w1"]) + params["b1"]
    h = nd.gelu(h) if activation == "gelu" else nd.relu(h)
    return nd.matmul(h, params["w2"]) + params["b2"]


def _ln(x: nd.Tensor, params: dict, name: str) -> nd.Tensor:
    return nd.layer_norm(x, params[f"{name}.g"], params[f"{name}.b"])


def padding_mask_add(pad_mask: np.ndarray, query_len: int) -> np.ndarray:
    """(Lq, Lk) additive mask blocking attention to padded key positions."""
    row = np.where(pad_mask, 0.0, MASK_VALUE)
    return np.tile(row, (query_len, 1))


def causal_mask_add(length: int) -> np.ndarray:
    mask = np.triu(np.full((length, length), MASK_VALUE), k=1)
    return mask


# ---------------------------------------------------------------------------
# encoder


def init_encoder_params(rng: np.random.Generator, cfg: EncoderConfig, dtype) -> dict[str, nd.Tensor]:
    d = cfg.model_dim
    params: dict[str, nd.Tensor] = {}
    for i in range(cfg.layers):
        p = f"enc.l{i}"
        for key, val in _attention_params(rng, d, d, d, dtype).items():
            params[f"{p}.attn.{key}"] = val
        for key, val in _ffn_params(rng, d, cfg.ff_dim, dtype).items():
            params[f"{p}.ffn.{key}"] = val
        for ln in ("ln1", "ln2"):
            params[f"{p}.{ln}.g"] = _ones(d, dtype)
            params[f"{p}.{ln}.b"] = _zeros(d, dtype)
    if cfg.layers:
        params["enc.ln_out.g"] = _ones(d, dtype)
        params["enc.ln_out.b"] = _zeros(d, dtype)
    return params


def encode(
    features: nd.Tensor,
    pad_mask: np.ndarray,
    params: dict,
    cfg: EncoderConfig,
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> EncodedFeatures:
    """Pre-norm self-attention encoder over backbone features.

    A zero-layer config passes the (position-encoded) input straight through.
    """
    length = features.shape[0]
    pad_mask = np.asarray(pad_mask, dtype=bool)
    if pad_mask.shape != (length,):
        raise nd.ShapeError(f"pad mask shape {pad_mask.shape} does not match {length} positions")
    x = features
    if cfg.use_pe:
        x = x + nd.Tensor(sinusoidal_pe(length, cfg.model_dim, features.dtype))
    if cfg.layers == 0:
        return EncodedFeatures(tokens=x, pad_mask=pad_mask)

    mask = padding_mask_add(pad_mask, length)
    rng = rng or np.random.default_rng(0)
    for i in range(cfg.layers):
        p = f"enc.l{i}"
        sub = {k.split(".")[-1]: v for k, v in params.items() if k.startswith(f"{p}.attn.")}
        h = _ln(x, params, f"{p}.ln1")
        x = x + nd.dropout(multi_head_attention(h, h, sub, cfg.heads, mask), cfg.dropout, train, rng)
        fsub = {k.split(".")[-1]: v for k, v in params.items() if k.startswith(f"{p}.ffn.")}
        x = x + nd.dropout(_ffn(_ln(x, params, f"{p}.ln2"), fsub, cfg.activation), cfg.dropout, train, rng)
    x = _ln(x, params, "enc.ln_out")
    return EncodedFeatures(tokens=x, pad_mask=pad_mask)


# ---------------------------------------------------------------------------
# decoder


def init_decoder_params(rng: np.random.Generator, cfg: DecoderConfig, dtype) -> dict[str, nd.Tensor]:
    d = cfg.model_dim
    params: dict[str, nd.Tensor] = {
        "dec.embed": nd.Tensor(
            (rng.normal(size=(cfg.vocab_size, d)) * 0.02).astype(dtype), requires_grad=True
        ),
        "dec.pos": nd.Tensor(
            (rng.normal(size=(cfg.max_positions, d)) * 0.02).astype(dtype), requires_grad=True
        ),
        "dec.ln_in.g": _ones(d, dtype),
        "dec.ln_in.b": _zeros(d, dtype),
        "dec.ln_out.g": _ones(d, dtype),
        "dec.ln_out.b": _zeros(d, dtype),
    }
    for i in range(cfg.layers):
        p = f"dec.l{i}"
        for key, val in _attention_params(rng, d, d, d, dtype).items():
            params[f"{p}.self.{key}"] = val
        for key, val in _attention_params(rng, d, cfg.memory_dim, d, dtype).items():
            params[f"{p}.cross.{key}"] = val
        for key, val in _ffn_params(rng, d, cfg.ff_dim, dtype).items():
            params[f"{p}.ffn.{key}"] = val
        for ln in ("ln1", "ln2", "ln3"):
            params[f"{p}.{ln}.g"] = _ones(d, dtype)
            params[f"{p}.{ln}.b"] = _zeros(d, dtype)
    return params


def decode_teacher_forced(
    encoded: EncodedFeatures,
    target_ids,
    params: dict,
    cfg: DecoderConfig,
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> DecoderOutput:
    """Causal decoding of the full (BOS ... EOS [PAD...]) target sequence.

    The language-model head shares storage with the word embedding: logits
    are states @ embed^T.
    """
    ids = np.asarray(target_ids, dtype=np.int64)
    length = ids.shape[0]
    if length > cfg.max_positions:
        raise ValueError(f"target length {length} exceeds max positions {cfg.max_positions}")
    rng = rng or np.random.default_rng(0)

    embed = params["dec.embed"]
    x = nd.embedding_lookup(embed, ids) + nd.take(params["dec.pos"], np.arange(length), axis=0)
    x = _ln(x, params, "dec.ln_in")
    x = nd.dropout(x, cfg.dropout, train, rng)

    causal = causal_mask_add(length)
    cross = padding_mask_add(encoded.pad_mask, length)
    for i in range(cfg.layers):
        p = f"dec.l{i}"
        ssub = {k.split(".")[-1]: v for k, v in params.items() if k.startswith(f"{p}.self.")}
        h = _ln(x, params, f"{p}.ln1")
        x = x + nd.dropout(multi_head_attention(h, h, ssub, cfg.heads, causal), cfg.dropout, train, rng)
        csub = {k.split(".")[-1]: v for k, v in params.items() if k.startswith(f"{p}.cross.")}
        h = _ln(x, params, f"{p}.ln2")
        x = x + nd.dropout(
            multi_head_attention(h, encoded.tokens, csub, cfg.heads, cross), cfg.dropout, train, rng
        )
        fsub = {k.split(".")[-1]: v for k, v in params.items() if k.startswith(f"{p}.ffn.")}
        x = x + nd.dropout(_ffn(_ln(x, params, f"{p}.ln3"), fsub, cfg.activation), cfg.dropout, train, rng)
    states = _ln(x, params, "dec.ln_out")
    logits = nd.matmul(states, nd.transpose(embed))
    return DecoderOutput(states=states, logits=logits)


def translation_loss(logits: nd.Tensor, target_ids, pad_id: int = PAD_ID) -> nd.Tensor:
    """Mean cross-entropy of position i's logits against target i+1, PAD ignored."""
    ids = np.asarray(target_ids, dtype=np.int64)
    n = ids.shape[0]
    predicted = nd.take(logits, np.arange(n - 1), axis=0)
    return nd.cross_entropy_logits(predicted, ids[1:], ignore_index=pad_id)


def _log_softmax_row(row: np.ndarray) -> np.ndarray:
    m = row.max()
    return row - m - math.log(np.exp(row - m).sum())


def beam_search(
    encoded: EncodedFeatures,
    params: dict,
    cfg: DecoderConfig,
    beam_size: int = 5,
    max_len: int = 32,
    length_penalty: float = 0.0,
    bos_id: int = BOS_ID,
    eos_id: int = EOS_ID,
) -> GenerationResult:
    """Standard beam search over summed log-probabilities.

    A beam finalizes at EOS (or is force-finalized at ``max_len``); the
    highest-scoring finalized sequence wins, score ties broken by token ids.
    ``length_penalty`` divides scores by length**penalty when ranking.
    """
    if beam_size < 1:
        raise ValueError(f"beam size must be >= 1, got {beam_size}")
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")

    def ranking(score: float, n_tokens: int) -> float:
        if length_penalty == 0.0:
            return score
        return score / (max(n_tokens, 1) ** length_penalty)

    with nd.no_grad():
        live = [((), ())]  # (token ids, per-step logps)
        finished: list[tuple[tuple, tuple]] = []
        for _ in range(max_len):
            candidates = []
            for ids, logps in live:
                seq = np.array((bos_id,) + ids, dtype=np.int64)
                out = decode_teacher_forced(encoded, seq, params, cfg, train=False)
                logp = _log_softmax_row(out.logits.data[-1])
                order = np.argsort(-logp, kind="stable")[: min(beam_size, logp.size)]
                for tok in order:
                    candidates.append((ids + (int(tok),), logps + (float(logp[tok]),)))
            candidates.sort(key=lambda c: (-ranking(sum(c[1]), len(c[0])), c[0]))
            live = []
            for ids, logps in candidates:
                if ids[-1] == eos_id:
                    finished.append((ids, logps))
                elif len(live) < beam_size:
                    live.append((ids, logps))
                if len(live) >= beam_size and len(finished) >= beam_size:
                    break
            if not live:
                break
        finished.extend(live)  # force-finalize anything still running
    best = min(finished, key=lambda c: (-ranking(sum(c[1]), len(c[0])), c[0]))
    return GenerationResult(ids=list(best[0]), logps=list(best[1]), score=sum(best[1]))
