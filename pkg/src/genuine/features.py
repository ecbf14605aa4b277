"""Token-level uncertainty features and their sequence aggregates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class TokenFeatures:
    prob: float      # chosen-token probability, in (0,1]
    entropy: float   # full next-token distribution entropy, >= 0

    def __post_init__(self):
        if not 0.0 < self.prob <= 1.0:
            raise FeatureError(f"token probability must lie in (0,1], got {self.prob!r}")
        if self.entropy < 0.0 or not math.isfinite(self.entropy):
            raise FeatureError(f"token entropy must be finite and >= 0, got {self.entropy!r}")


@dataclass(frozen=True)
class AggregateFeatures:
    """Sequence-level summaries of the per-token features.

    Std uses the n-1 denominator and is defined as 0 for single-token
    sequences. Order of as_vector() is fixed and relied on by the flat
    classifiers.
    """
    max_ent: float
    min_ent: float
    avg_ent: float
    std_ent: float
    max_prob: float
    min_prob: float
    avg_prob: float
    std_prob: float

    def as_vector(self) -> np.ndarray:
        return np.array([[self.max_ent, self.min_ent, self.avg_ent, self.std_ent,
                          self.max_prob, self.min_prob, self.avg_prob, self.std_prob]])


@dataclass
class NodeFeatureSet:
    x_grey: np.ndarray           # n x 2: [prob, entropy] per node
    x_white: np.ndarray | None   # n x d_e embeddings, when the record has them


def entropy(distribution) -> float:
    """Natural-log entropy of a probability vector; 0*log(0) counts as 0."""
    p = np.asarray(distribution, dtype=np.float64)
    if p.ndim != 1:
        raise FeatureError(f"distribution must be 1-D, got shape {p.shape}")
    if np.any(p < 0):
        raise FeatureError("distribution has negative entries")
    total = float(p.sum())
    if abs(total - 1.0) > 1e-6:
        raise FeatureError(f"distribution sums to {total!r}, not 1")
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def aggregate(tokens: list[TokenFeatures]) -> AggregateFeatures:
    if not tokens:
        raise FeatureError("cannot aggregate an empty token sequence")
    ents = np.array([t.entropy for t in tokens])
    probs = np.array([t.prob for t in tokens])
    std = lambda x: float(x.std(ddof=1)) if len(x) > 1 else 0.0
    return AggregateFeatures(
        max_ent=float(ents.max()), min_ent=float(ents.min()),
        avg_ent=float(ents.mean()), std_ent=std(ents),
        max_prob=float(probs.max()), min_prob=float(probs.min()),
        avg_prob=float(probs.mean()), std_prob=std(probs),
    )


def align_subwords(word_spans, subword_probs, subword_entropies) -> list[TokenFeatures]:
    """Collapse subword features onto words.

    word_spans are (start, end) half-open index ranges that must partition the
    subword sequence in order. Word probability is the geometric mean of the
    subword probabilities (log-probabilities stay additive); word entropy is
    the arithmetic mean.
    """
    probs = np.asarray(subword_probs, dtype=np.float64)
    ents = np.asarray(subword_entropies, dtype=np.float64)
    if probs.shape != ents.shape:
        raise FeatureError("subword probs and entropies must have equal length")
    cursor = 0
    out = []
    for start, end in word_spans:
        if start != cursor or end <= start:
            raise FeatureError(
                f"word spans must partition the subwords in order; got ({start},{end}) at {cursor}")
        cursor = end
        chunk_p = probs[start:end]
        chunk_h = ents[start:end]
        out.append(TokenFeatures(
            prob=float(np.exp(np.log(chunk_p).mean())),
            entropy=float(chunk_h.mean()),
        ))
    if cursor != len(probs):
        raise FeatureError(f"word spans cover {cursor} of {len(probs)} subwords")
    return out


def token_features(record) -> list[TokenFeatures]:
    return [TokenFeatures(prob=p, entropy=h)
            for p, h in zip(record.token_probs, record.token_entropies)]


def build_node_features(record, graph) -> NodeFeatureSet:
    """Per-node feature matrices, rows ordered by graph node index.

    Graph nodes are document token positions, so row j of x_grey holds
    [prob_j, entropy_j]; x_white is present exactly when the record carries
    embeddings.
    """
    n = record.token_count
    if graph.n != n:
        raise FeatureError(f"graph has {graph.n} nodes but record {record.id!r} has {n} tokens")
    x_grey = np.column_stack([
        np.asarray(record.token_probs, dtype=np.float64),
        np.asarray(record.token_entropies, dtype=np.float64),
    ])
    x_white = None
    if record.embeddings is not None:
        x_white = np.asarray(record.embeddings, dtype=np.float64)
    for mat in (x_grey,) + ((x_white,) if x_white is not None else ()):
        if not np.all(np.isfinite(mat)):
            raise FeatureError(f"record {record.id!r}: non-finite node features")
    return NodeFeatureSet(x_grey=x_grey, x_white=x_white)
