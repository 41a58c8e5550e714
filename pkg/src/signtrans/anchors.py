"""Mining of anchor words from a translation corpus.

Anchor words are content words (by default verbs and nouns) frequent enough
to act as supervision targets for the contrastive training objective.  The
pipeline is: rule tokenizer -> lexicon+suffix tagger (or a user-supplied
pre-tagged corpus) -> frequency filter -> optional pretrained-vector
initialization of the anchor embedding table.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .lexicon import DEFAULT_LEXICON

# word-type presets for the tag filter
TAG_PRESETS = {
    "V": frozenset({"VB", "VBD", "VBG", "VBN", "VBP", "VBZ"}),
    "N": frozenset({"NN", "NNP", "NNS"}),
}
TAG_PRESETS["VN"] = TAG_PRESETS["V"] | TAG_PRESETS["N"]
TAG_PRESETS["VNA"] = TAG_PRESETS["VN"] | frozenset({"JJ", "JJR", "JJS", "RB", "RBR", "RBS"})

_TOKEN_RE = re.compile(r"[A-Za-z0-9]+|(?<=[A-Za-z0-9])'[A-Za-z]+|[^A-Za-z0-9\s]")


@dataclass
class TaggedSentence:
    tokens: list[str]
    tags: list[str]
    sample_id: int

    def __post_init__(self):
        if len(self.tokens) != len(self.tags):
            raise ValueError(
                f"sample {self.sample_id}: {len(self.tokens)} tokens vs {len(self.tags)} tags"
            )


@dataclass
class AnchorVocab:
    """Mined anchor words ordered by descending count (ties alphabetical)."""

    words: list[str]
    counts: list[int]
    doc_counts: list[int]
    tagset_used: frozenset = frozenset()
    _index: dict = field(default=None, repr=False, compare=False)

    def __len__(self):
        return len(self.words)

    def index(self, word: str):
        if self._index is None:
            self._index = {w: i for i, w in enumerate(self.words)}
        return self._index.get(word)

    def to_tsv(self, path) -> None:
        lines = [f"{w}\t{c}\t{d}" for w, c, d in zip(self.words, self.counts, self.doc_counts)]
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")

    @classmethod
    def from_tsv(cls, path) -> "AnchorVocab":
        words, counts, docs = [], [], []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            w, c, d = line.split("\t")
            words.append(w)
            counts.append(int(c))
            docs.append(int(d))
        return cls(words, counts, docs)


@dataclass
class EmbeddingInit:
    """Initial anchor embedding matrix plus which rows came from a file."""

    matrix: np.ndarray
    d_ca: int
    oov_mask: np.ndarray


def tokenize(text: str) -> list[str]:
    """Lowercased rule tokenization: punctuation split off, clitics split at '."""
    return [t.lower() for t in _TOKEN_RE.findall(text)]


def tokenize_cased(text: str) -> list[str]:
    """Same rules as :func:`tokenize` but preserving case (for the tagger)."""
    return _TOKEN_RE.findall(text)


def pos_tag(tokens: list[str], lexicon: dict | None = None) -> list[str]:
    """Tag each token via lexicon lookup, then suffix heuristics, then NN."""
    lex = DEFAULT_LEXICON if lexicon is None else lexicon
    tags = []
    for tok in tokens:
        low = tok.lower()
        tag = lex.get(low)
        if tag is None:
            if low.endswith("ing") and len(low) > 4:
                tag = "VBG"
            elif low.endswith("ed") and len(low) > 3:
                tag = "VBD"
            elif (
                low.endswith("s")
                and len(low) > 2
                and lex.get(low[:-1], "").startswith("NN")
            ):
                tag = "NNS"
            elif tok[:1].isupper():
                tag = "NNP"
            else:
                tag = "NN"
        tags.append(tag)
    return tags


def tag_corpus(sentences, lexicon: dict | None = None) -> list[TaggedSentence]:
    """Tokenize and tag raw sentences; counting later is case-insensitive."""
    out = []
    for i, text in enumerate(sentences):
        toks = tokenize_cased(text)
        out.append(TaggedSentence([t.lower() for t in toks], pos_tag(toks, lexicon), i))
    return out


def select_anchors(
    tagged_corpus: list[TaggedSentence],
    tagset,
    min_count: int = 10,
    max_doc_fraction: float = 0.9,
) -> AnchorVocab:
    """Keep words that carry a tag in ``tagset`` at least once, occur strictly
    more than ``min_count`` times, and appear in fewer than
    ``max_doc_fraction`` of the samples."""
    if isinstance(tagset, str):
        tagset = TAG_PRESETS[tagset]
    tagset = frozenset(tagset)

    counts: dict[str, int] = {}
    docs: dict[str, set] = {}
    tagged_in: set[str] = set()
    for sent in tagged_corpus:
        for tok, tag in zip(sent.tokens, sent.tags):
            counts[tok] = counts.get(tok, 0) + 1
            docs.setdefault(tok, set()).add(sent.sample_id)
            if tag in tagset:
                tagged_in.add(tok)

    n_samples = len(tagged_corpus)
    doc_limit = max_doc_fraction * n_samples
    kept = [
        w
        for w in tagged_in
        if counts[w] > min_count and len(docs[w]) < doc_limit
    ]
    kept.sort(key=lambda w: (-counts[w], w))
    return AnchorVocab(
        words=kept,
        counts=[counts[w] for w in kept],
        doc_counts=[len(docs[w]) for w in kept],
        tagset_used=tagset,
    )


def read_pretagged_tsv(path) -> list[TaggedSentence]:
    """token<TAB>tag lines, blank line between sentences."""
    sentences = []
    tokens: list[str] = []
    tags: list[str] = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        if not raw.strip():
            if tokens:
                sentences.append(TaggedSentence([t.lower() for t in tokens], tags, len(sentences)))
                tokens, tags = [], []
            continue
        tok, tag = raw.split("\t")
        tokens.append(tok)
        tags.append(tag)
    if tokens:
        sentences.append(TaggedSentence([t.lower() for t in tokens], tags, len(sentences)))
    return sentences


def load_pretrained_embeddings(
    path, vocab: AnchorVocab, d_ca: int = 300, seed: int = 0
) -> EmbeddingInit:
    """Copy matching rows from a whitespace "word v1 ... vd" text file.

    Words absent from the file (or all words, when ``path`` is None) are
    initialized uniformly in [-0.1, 0.1] from the run seed and flagged in
    ``oov_mask``.  The file's vector width overrides ``d_ca``.
    """
    vectors: dict[str, np.ndarray] = {}
    width = None
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.rstrip("\n").split()
                if not parts:
                    continue
                word, values = parts[0], parts[1:]
                if width is None:
                    width = len(values)
                elif len(values) != width:
                    raise ValueError(
                        f"line {lineno}: expected {width} values, got {len(values)}"
                    )
                if word in vectors or vocab.index(word) is None:
                    continue
                vectors[word] = np.array([float(v) for v in values], dtype=np.float64)
    if width is None:
        width = d_ca

    rng = np.random.default_rng(seed)
    matrix = rng.uniform(-0.1, 0.1, size=(len(vocab.words), width))
    oov = np.ones(len(vocab.words), dtype=bool)
    for i, word in enumerate(vocab.words):
        if word in vectors:
            matrix[i] = vectors[word]
            oov[i] = False
    return EmbeddingInit(matrix=matrix, d_ca=width, oov_mask=oov)
