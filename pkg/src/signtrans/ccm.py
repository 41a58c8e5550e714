"""Training-only contrastive supervision from anchor words.

Anchor words found in a batch's translations are embedded from a global
learnable table and used as queries in multi-head cross-attention against
each sample's encoded visual features.  For every anchor, one sample that
contains the word (positive) and one that does not (negative) are drawn, and
a hinge triplet loss pushes the positive query result toward the anchor
embedding and the negative away.  Inference never touches any of this.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import ndtensor as nd
from .anchors import AnchorVocab, tokenize
from .transformer import EncodedFeatures, MASK_VALUE


@dataclass
class CcmConfig:
    margin: float = 0.4
    weight: float = 1.0
    heads: int = 4
    hidden: int = 64
    # hinge applied to the mean violation by default; per-triplet hinges as
    # the conventional alternative
    hinge_per_triplet: bool = False

    def __post_init__(self):
        if self.margin <= 0:
            raise ValueError(f"margin must be positive, got {self.margin}")
        if self.weight < 0:
            raise ValueError(f"loss weight must be non-negative, got {self.weight}")


@dataclass
class BatchAnchorSet:
    """Unique anchor ids present in a batch plus per-anchor sample membership."""

    anchor_ids: list[int]
    membership: list[set[int]]
    n_samples: int

    @property
    def m(self) -> int:
        return len(self.anchor_ids)


@dataclass
class QueryTensor:
    """Cross-attention query results H: anchor m against sample n.

    ``columns[n]`` is the (M, d_ca) result for sample n; ``as_array`` stacks
    them to the (M, N, d_ca) layout.
    """

    columns: list[nd.Tensor]
    anchor_ids: list[int]

    @property
    def m(self) -> int:
        return len(self.anchor_ids)

    @property
    def n(self) -> int:
        return len(self.columns)

    def vector(self, m: int, n: int) -> nd.Tensor:
        d = self.columns[n].shape[1]
        return nd.take(self.columns[n], [m], axis=0).reshape((d,))

    def as_array(self) -> np.ndarray:
        return np.stack([c.data for c in self.columns], axis=1)


def collect_batch_anchors(translations: list[str], vocab: AnchorVocab) -> BatchAnchorSet:
    """Scan word-tokenized translations for vocabulary anchors.

    A word occurring twice in one sample still contributes one membership.
    Anchors are ordered by vocabulary index.
    """
    members: dict[int, set[int]] = {}
    for n, text in enumerate(translations):
        for tok in tokenize(text):
            idx = vocab.index(tok)
            if idx is not None:
                members.setdefault(idx, set()).add(n)
    ordered = sorted(members)
    return BatchAnchorSet(
        anchor_ids=ordered,
        membership=[members[i] for i in ordered],
        n_samples=len(translations),
    )


def init_ccm_params(
    rng: np.random.Generator, embedding_init: np.ndarray, d_visual: int, cfg: CcmConfig, dtype
) -> dict[str, nd.Tensor]:
    d_ca = embedding_init.shape[1]
    width = cfg.heads * cfg.hidden

    def proj(d_in, d_out):
        bound = math.sqrt(1.0 / d_in)
        return nd.Tensor(rng.uniform(-bound, bound, size=(d_in, d_out)).astype(dtype), requires_grad=True)

    return {
        "ccm.table": nd.Tensor(embedding_init.astype(dtype), requires_grad=True),
        "ccm.wq": proj(d_ca, width),
        "ccm.wk": proj(d_visual, width),
        "ccm.wv": proj(d_visual, width),
        "ccm.wo": proj(width, d_ca),
    }


def anchor_query(
    params: dict,
    batch_anchors: BatchAnchorSet,
    encoded: list[EncodedFeatures],
    cfg: CcmConfig,
    return_attention: bool = False,
):
    """Query every batch anchor against every sample's encoded features.

    Per head: softmax(Q W_q (s W_k)^T / sqrt(d)) (s W_v), padded positions
    masked out; heads are concatenated and projected back to the anchor
    embedding width.
    """
    table = params["ccm.table"]
    if batch_anchors.m == 0:
        return QueryTensor(columns=[], anchor_ids=[])
    q_rows = nd.embedding_lookup(table, batch_anchors.anchor_ids)
    heads, hidden = cfg.heads, cfg.hidden
    m = batch_anchors.m

    def split(x, length):
        return nd.transpose(x.reshape((length, heads, hidden)), (1, 0, 2))

    q = split(nd.matmul(q_rows, params["ccm.wq"]), m)
    columns = []
    attention = []
    for sample in encoded:
        length = sample.tokens.shape[0]
        k = split(nd.matmul(sample.tokens, params["ccm.wk"]), length)
        v = split(nd.matmul(sample.tokens, params["ccm.wv"]), length)
        scores = nd.scale(nd.matmul(q, nd.transpose(k, (0, 2, 1))), 1.0 / math.sqrt(hidden))
        mask = np.where(sample.pad_mask, 0.0, MASK_VALUE)[None, None, :]
        attn = nd.softmax(scores + nd.Tensor(mask.astype(scores.dtype)), axis=-1)
        ctx = nd.transpose(nd.matmul(attn, v), (1, 0, 2)).reshape((m, heads * hidden))
        columns.append(nd.matmul(ctx, params["ccm.wo"]))
        if return_attention:
            attention.append(attn.data)
    result = QueryTensor(columns=columns, anchor_ids=list(batch_anchors.anchor_ids))
    if return_attention:
        return result, attention
    return result


def sample_triplets(batch_anchors: BatchAnchorSet, rng: np.random.Generator):
    """Draw one positive and one negative sample per anchor, uniformly.

    Anchors lacking either side (present everywhere or nowhere else) are
    skipped and reported so training telemetry can count them.
    """
    triplets = []
    skipped = []
    everyone = set(range(batch_anchors.n_samples))
    for m, members in enumerate(batch_anchors.membership):
        positives = sorted(members)
        negatives = sorted(everyone - members)
        if not positives or not negatives:
            skipped.append(m)
            continue
        pos = positives[int(rng.integers(len(positives)))]
        neg = negatives[int(rng.integers(len(negatives)))]
        triplets.append((m, pos, neg))
    return triplets, skipped


def triplet_loss(
    h: QueryTensor,
    triplets,
    params: dict,
    margin: float,
    hinge_per_triplet: bool = False,
    dtype=np.float64,
) -> nd.Tensor:
    """Inter-sample triplet loss over anchor query results.

    Each retained triplet contributes margin - sim(H+, Q) + sim(H-, Q); the
    default applies the hinge to the mean of these terms, the alternative
    averages per-triplet hinges.  No triplets gives a constant zero.
    """
    if not triplets:
        return nd.Tensor(np.zeros((), dtype=dtype))
    table = params["ccm.table"]
    mu = nd.Tensor(np.asarray(margin, dtype=table.dtype))
    terms = []
    for m, pos, neg in triplets:
        anchor = nd.take(table, [h.anchor_ids[m]], axis=0).reshape((table.shape[1],))
        sim_pos = nd.cosine_similarity(h.vector(m, pos), anchor)
        sim_neg = nd.cosine_similarity(h.vector(m, neg), anchor)
        term = nd.subtract(mu, sim_pos) + sim_neg
        if hinge_per_triplet:
            term = nd.relu(term)
        terms.append(term.reshape((1,)))
    violations = nd.concat(terms, axis=0).mean()
    if hinge_per_triplet:
        return violations
    return nd.relu(violations)


def combined_loss(l_ce: nd.Tensor, l_itl: nd.Tensor, weight: float) -> nd.Tensor:
    """Joint objective: translation loss plus weighted triplet loss."""
    return l_ce + nd.scale(l_itl, weight)
