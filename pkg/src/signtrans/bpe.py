"""Byte-pair-encoding subword tokenizer trained from scratch.

Words split into characters with the final character carrying an
end-of-word marker "</w>"; training repeatedly merges the most frequent
adjacent symbol pair (ties broken by lexicographically smallest pair) until
the vocabulary reaches the target size or no pair repeats.  Special token
ids are pinned: PAD=0, BOS=1, EOS=2, UNK=3.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

PAD_ID = 0
BOS_ID = 1
EOS_ID = 2
UNK_ID = 3
SPECIALS = {"<pad>": PAD_ID, "<bos>": BOS_ID, "<eos>": EOS_ID, "<unk>": UNK_ID}
END = "</w>"


@dataclass
class BpeModel:
    merges: list[tuple[str, str]]
    vocab: dict[str, int]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)
    _id_to_token: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for name, idx in SPECIALS.items():
            if self.vocab.get(name) != idx:
                raise ValueError(f"special token {name} must have id {idx}")

    @property
    def size(self) -> int:
        return len(self.vocab)

    def token_for(self, idx: int) -> str:
        if self._id_to_token is None:
            self._id_to_token = {i: t for t, i in self.vocab.items()}
        try:
            return self._id_to_token[idx]
        except KeyError:
            raise IndexError(f"unknown token id {idx} (vocabulary size {self.size})") from None

    def save(self, path) -> None:
        payload = {"merges": [list(m) for m in self.merges], "vocab": self.vocab}
        Path(path).write_text(json.dumps(payload, ensure_ascii=False, sort_keys=True), "utf-8")

    @classmethod
    def load(cls, path) -> "BpeModel":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls([tuple(m) for m in payload["merges"]], dict(payload["vocab"]))


def _word_symbols(word: str) -> tuple[str, ...]:
    return tuple(word[:-1]) + (word[-1] + END,)


def train(corpus, target_vocab_size: int) -> BpeModel:
    """Learn merges from an iterable of sentences (whitespace-delimited words)."""
    word_freq = Counter()
    for line in corpus:
        word_freq.update(line.split())
    if not word_freq:
        raise ValueError("cannot train BPE on an empty corpus")

    pieces = {_word_symbols(w): f for w, f in word_freq.items()}
    base_symbols = sorted({s for word in pieces for s in word})
    base_size = len(SPECIALS) + len(base_symbols)
    if target_vocab_size < base_size:
        raise ValueError(
            f"target vocab size {target_vocab_size} below base symbols + specials ({base_size})"
        )

    merges: list[tuple[str, str]] = []
    size = base_size
    while size < target_vocab_size:
        pair_counts = Counter()
        for word, freq in pieces.items():
            for pair in zip(word, word[1:]):
                pair_counts[pair] += freq
        if not pair_counts:
            break
        best_count = max(pair_counts.values())
        if best_count < 2:
            break
        best = min(p for p, c in pair_counts.items() if c == best_count)
        merges.append(best)
        merged = best[0] + best[1]
        new_pieces = {}
        for word, freq in pieces.items():
            out = []
            i = 0
            while i < len(word):
                if i + 1 < len(word) and (word[i], word[i + 1]) == best:
                    out.append(merged)
                    i += 2
                else:
                    out.append(word[i])
                    i += 1
            new_pieces[tuple(out)] = new_pieces.get(tuple(out), 0) + freq
        pieces = new_pieces
        size += 1

    vocab = dict(SPECIALS)
    for sym in base_symbols:
        vocab[sym] = len(vocab)
    for a, b in merges:
        vocab[a + b] = len(vocab)
    return BpeModel(merges, vocab)


def _encode_word(word: str, model: BpeModel) -> tuple[str, ...]:
    cached = model._cache.get(word)
    if cached is not None:
        return cached
    syms = list(_word_symbols(word))
    for a, b in model.merges:
        i = 0
        out = []
        while i < len(syms):
            if i + 1 < len(syms) and syms[i] == a and syms[i + 1] == b:
                out.append(a + b)
                i += 2
            else:
                out.append(syms[i])
                i += 1
        syms = out
        if len(syms) == 1:
            break
    result = tuple(syms)
    model._cache[word] = result
    return result


def encode(text: str, model: BpeModel, add_specials: bool = False) -> list[int]:
    """Apply merges per word in training order; unknown symbols map to UNK."""
    ids = []
    for word in text.split():
        for sym in _encode_word(word, model):
            ids.append(model.vocab.get(sym, UNK_ID))
    if add_specials:
        ids = [BOS_ID] + ids + [EOS_ID]
    return ids


def decode(ids, model: BpeModel) -> str:
    """Strip specials, join subwords, restore spaces at end-of-word markers."""
    parts = []
    for idx in ids:
        idx = int(idx)
        if idx in (PAD_ID, BOS_ID, EOS_ID):
            continue
        parts.append(model.token_for(idx))
    return "".join(parts).replace(END, " ").strip()
