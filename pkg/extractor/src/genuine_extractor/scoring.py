"""Overlap scoring used to label extracted records. Scores live in [0,1]."""

from __future__ import annotations

import math
import string
from collections import Counter

THRESHOLDS = {"qa": 0.3, "translation": 0.3, "summarization": 0.35}

_PUNCT = str.maketrans({c: " " for c in string.punctuation})


def tokens(text: str) -> list[str]:
    return text.lower().translate(_PUNCT).split()


def _f1(match: float, len_c: int, len_r: int) -> float:
    if match == 0 or len_c == 0 or len_r == 0:
        return 0.0
    p, r = match / len_c, match / len_r
    return 2 * p * r / (p + r)


def rouge1(candidate: str, reference: str) -> float:
    c, r = tokens(candidate), tokens(reference)
    overlap = sum((Counter(c) & Counter(r)).values())
    return _f1(overlap, len(c), len(r))


def rougeL(candidate: str, reference: str) -> float:
    c, r = tokens(candidate), tokens(reference)
    if not c or not r:
        return 0.0
    prev = [0] * (len(r) + 1)
    for tok in c:
        cur = [0]
        for j, other in enumerate(r, start=1):
            cur.append(prev[j - 1] + 1 if tok == other else max(prev[j], cur[j - 1]))
        prev = cur
    return _f1(prev[-1], len(c), len(r))


def bleu(candidate: str, reference: str) -> float:
    c, r = tokens(candidate), tokens(reference)
    if not c or not r:
        return 0.0
    logs = []
    for n in range(1, 5):
        grams_c = Counter(tuple(c[i:i + n]) for i in range(len(c) - n + 1))
        total = sum(grams_c.values())
        if total == 0:
            continue
        grams_r = Counter(tuple(r[i:i + n]) for i in range(len(r) - n + 1))
        clipped = sum((grams_c & grams_r).values())
        logs.append(math.log(clipped / total if clipped else 1.0 / (total + 1)))
    if not logs:
        return 0.0
    bp = 1.0 if len(c) >= len(r) else math.exp(1 - len(r) / len(c))
    return bp * math.exp(sum(logs) / len(logs))


SCORERS = {"qa": rouge1, "translation": bleu, "summarization": rougeL}


def score(candidate: str, reference: str, task: str) -> float:
    return SCORERS[task](candidate, reference)


def label(value: float, task: str) -> int:
    return int(value >= THRESHOLDS[task])
