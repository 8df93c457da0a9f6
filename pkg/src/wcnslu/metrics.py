"""Scoring: edit alignment / WER, n-best oracle selection, SQuAD-style F1 and EM, intent matching."""

from __future__ import annotations

import re
import string
from collections import Counter
from typing import NamedTuple, Sequence

from .lattice import ScoredHypothesis

_PUNCT = re.compile(f"[{re.escape(string.punctuation)}]")
_ARTICLES = re.compile(r"\b(a|an|the)\b")


class EmptyReference(ValueError):
    pass


class EmptyNBest(ValueError):
    pass


class EmptyLabelSet(ValueError):
    pass


class EditAlignment(NamedTuple):
    substitutions: int
    deletions: int
    insertions: int
    hits: int
    ref_len: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions


def edit_align(hyp: Sequence[str], ref: Sequence[str]) -> EditAlignment:
    """Unit-cost Levenshtein alignment of ``hyp`` against ``ref``.

    Among minimum-cost alignments the one with the most hits wins; at fixed
    cost and ref/hyp lengths that pins down S, D and I uniquely.
    """
    n, m = len(ref), len(hyp)
    # cell = (cost, -hits, subs, dels, ins); tuple order is the tie-break
    prev = [(j, 0, 0, 0, j) for j in range(m + 1)]
    for i in range(1, n + 1):
        cur = [(i, 0, 0, i, 0)]
        for j in range(1, m + 1):
            c, h, s, d, ins = prev[j - 1]
            if ref[i - 1] == hyp[j - 1]:
                diag = (c, h - 1, s, d, ins)
            else:
                diag = (c + 1, h, s + 1, d, ins)
            c, h, s, d, ins = prev[j]
            dele = (c + 1, h, s, d + 1, ins)
            c, h, s, d, ins = cur[j - 1]
            inse = (c + 1, h, s, d, ins + 1)
            cur.append(min(diag, dele, inse, key=lambda t: (t[0], t[1])))
        prev = cur
    cost, neg_hits, s, d, ins = prev[m]
    return EditAlignment(s, d, ins, -neg_hits, n)


def tokenize_transcript(text: str) -> list[str]:
    """Lowercase, strip punctuation, split on whitespace (WER tokenization)."""
    return _PUNCT.sub(" ", text.lower()).split()


def wer(hyp: Sequence[str], ref: Sequence[str]) -> float:
    """Word error rate in percent; can exceed 100."""
    if not ref:
        raise EmptyReference("reference has no words")
    return 100.0 * edit_align(hyp, ref).errors / len(ref)


def select_oracle(nbest: Sequence[ScoredHypothesis], ref: Sequence[str]) -> ScoredHypothesis:
    """Closest hypothesis to ``ref``; ties go to the higher ASR score, then the earlier entry."""
    if not nbest:
        raise EmptyNBest("n-best list is empty")
    best = min(range(len(nbest)),
               key=lambda i: (edit_align(nbest[i].words, ref).errors, -nbest[i].score, i))
    return nbest[best]


def normalize_answer(text: str) -> tuple[str, ...]:
    text = text.lower()
    text = "".join(ch for ch in text if ch not in string.punctuation)
    text = _ARTICLES.sub(" ", text)
    return tuple(text.split())


def _tokens(x: str | Sequence[str], normalize: bool) -> tuple[str, ...]:
    if isinstance(x, str):
        return normalize_answer(x) if normalize else tuple(x.split())
    return tuple(x)


def unigram_f1(pred: str | Sequence[str], gold: str | Sequence[str], *,
               normalize: bool = True) -> float:
    """Token-overlap F1.  Strings are normalized first; token sequences are used as given."""
    p, g = _tokens(pred, normalize), _tokens(gold, normalize)
    if not p and not g:
        return 1.0
    if not p or not g:
        return 0.0
    overlap = sum((Counter(p) & Counter(g)).values())
    if overlap == 0:
        return 0.0
    precision, recall = overlap / len(p), overlap / len(g)
    return 2 * precision * recall / (precision + recall)


def exact_match(pred: str | Sequence[str], gold: str | Sequence[str], *,
                normalize: bool = True) -> int:
    return int(_tokens(pred, normalize) == _tokens(gold, normalize))


def best_over_golds(pred: str, golds: Sequence[str], *, normalize: bool = True) -> tuple[float, int]:
    """(max F1, max EM) of one prediction against several gold answers."""
    return (max(unigram_f1(pred, g, normalize=normalize) for g in golds),
            max(exact_match(pred, g, normalize=normalize) for g in golds))


def _label_pattern(label: str) -> re.Pattern:
    return re.compile(r"(?<![\w])" + re.escape(label.lower()) + r"(?![\w])")


def match_intent(llm_output: str, label_set: Sequence[str], *,
                 substring: bool = True) -> str | None:
    """Map free-form model output to a label, or ``None`` when nothing matches.

    Exact (case-insensitive, trimmed) equality wins.  Otherwise, if ``substring``
    is on, the label occurring earliest in the output as a whole token run is
    chosen, ties going to the alphabetically first label.
    """
    if not label_set:
        raise EmptyLabelSet("label set is empty")
    cleaned = llm_output.strip().strip(string.punctuation + string.whitespace).lower()
    for label in label_set:
        if cleaned == label.lower():
            return label
    if not substring:
        return None
    text = llm_output.lower()
    hits = []
    for label in label_set:
        m = _label_pattern(label).search(text)
        if m:
            hits.append((m.start(), label))
    return min(hits)[1] if hits else None
