"""Corpus-level translation metrics: BLEU-1..4 and ROUGE-L F1.

Scoring tokenizes by lowercasing and splitting on whitespace; corpora are
single-reference.  BLEU uses clipped n-gram precision with the standard
brevity penalty exp(min(0, 1 - r/c)); ROUGE-L averages per-pair LCS F1.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, asdict


@dataclass
class EvalReport:
    bleu1: float
    bleu2: float
    bleu3: float
    bleu4: float
    rouge_l: float
    sentences: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls(**json.loads(text))


def _tokens(text: str) -> list[str]:
    return text.lower().split()


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(hypotheses: list[str], references: list[str], max_n: int = 4) -> list[float]:
    """Corpus BLEU-1..max_n; any zero clipped precision zeroes that order's score."""
    if len(hypotheses) != len(references):
        raise ValueError(f"{len(hypotheses)} hypotheses vs {len(references)} references")
    if not hypotheses:
        raise ValueError("cannot score an empty corpus")

    matches = [0] * max_n
    totals = [0] * max_n
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        h = _tokens(hyp)
        r = _tokens(ref)
        hyp_len += len(h)
        ref_len += len(r)
        for n in range(1, max_n + 1):
            hc = _ngrams(h, n)
            rc = _ngrams(r, n)
            totals[n - 1] += sum(hc.values())
            matches[n - 1] += sum(min(c, rc[g]) for g, c in hc.items())

    if hyp_len == 0:
        return [0.0] * max_n
    bp = math.exp(min(0.0, 1.0 - ref_len / hyp_len))

    scores = []
    for n in range(1, max_n + 1):
        precisions = []
        for k in range(n):
            p = matches[k] / totals[k] if totals[k] else 0.0
            precisions.append(p)
        if any(p == 0.0 for p in precisions):
            scores.append(0.0)
        else:
            scores.append(bp * math.exp(sum(math.log(p) for p in precisions) / n))
    return scores


def _lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l_f1(hypotheses: list[str], references: list[str]) -> float:
    """Mean over pairs of the LCS-based F1 score."""
    if len(hypotheses) != len(references):
        raise ValueError(f"{len(hypotheses)} hypotheses vs {len(references)} references")
    if not hypotheses:
        raise ValueError("cannot score an empty corpus")

    total = 0.0
    for hyp, ref in zip(hypotheses, references):
        h = _tokens(hyp)
        r = _tokens(ref)
        lcs = _lcs_length(h, r)
        p = lcs / len(h) if h else 0.0
        rec = lcs / len(r) if r else 0.0
        total += 2 * p * rec / (p + rec) if p + rec > 0 else 0.0
    return total / len(hypotheses)


def evaluate_corpus(hypotheses: list[str], references: list[str]) -> EvalReport:
    b = bleu(hypotheses, references)
    return EvalReport(
        bleu1=b[0],
        bleu2=b[1],
        bleu3=b[2],
        bleu4=b[3],
        rouge_l=rouge_l_f1(hypotheses, references),
        sentences=len(hypotheses),
    )
