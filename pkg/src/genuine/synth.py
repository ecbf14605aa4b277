"""Planted-signal synthetic corpus generator.

Each record gets uniform random attachment trees (token i picks a head
uniformly among earlier tokens). The correctness label is a logistic draw on
the entropy of one designated pivot node at a fixed depth in the first
sentence; every other node carries i.i.d. noise features, so sequence-mean
statistics dilute the signal as graphs grow while a method that can find the
pivot keeps it. Embeddings mark the pivot along one fixed random direction
and carry a noisy copy of the signal along another, giving the
embedding-driven branch a way to locate the pivot that flat aggregates do
not have.

Generation also runs two logistic oracles (pivot entropy alone vs mean
entropy) and records their AUROC in a manifest, so datasets document their
own separability.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .corpus import GenerationRecord, LabeledExample, ParsedToken, SentenceParse
from .metrics import ScoredSet, auroc


class SynthSpecError(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticSpec:
    num_records: int = 1000
    tokens_min: int = 6
    tokens_max: int = 14
    sentences_min: int = 1
    sentences_max: int = 3
    embedding_dim: int | None = 8
    pivot_depth: int = 1
    signal_strength: float = 6.0
    noise_scale: float = 0.35
    seed: int = 7

    def validate(self):
        if self.num_records < 1:
            raise SynthSpecError("num_records must be >= 1")
        if not 2 <= self.tokens_min <= self.tokens_max:
            raise SynthSpecError("need 2 <= tokens_min <= tokens_max")
        if not 1 <= self.sentences_min <= self.sentences_max:
            raise SynthSpecError("need 1 <= sentences_min <= sentences_max")
        if self.pivot_depth < 1 or self.pivot_depth >= self.tokens_min:
            raise SynthSpecError("pivot_depth must be >= 1 and < tokens_min")
        if self.signal_strength < 0:
            raise SynthSpecError("signal_strength must be >= 0")
        if self.noise_scale <= 0:
            raise SynthSpecError("noise_scale must be > 0")
        if self.embedding_dim is not None and self.embedding_dim < 2:
            raise SynthSpecError("embedding_dim must be >= 2 (or omitted)")


# noise nodes draw entropy from |N(ENTROPY_CENTER, noise_scale)|; the pivot's
# spread is wider by PIVOT_SPREAD so extreme entropy values usually belong to
# the pivot, which gives learners a foothold that mean statistics dilute away
ENTROPY_CENTER = 1.0
PIVOT_SPREAD = 3.0        # pivot entropy sd as a multiple of noise_scale
MARKER_STRENGTH = 1.0     # pivot offset along the marker direction
COPY_GAIN = 1.0           # gain of the redundant signal copy in embeddings
COPY_NOISE = 0.8          # sd of the corruption on the redundant copy
EMBED_NOISE = 0.4         # isotropic embedding noise sd

_WORDS = ["alpha", "bravo", "carbon", "delta", "ember", "fjord", "granite",
          "hollow", "iris", "juniper", "kestrel", "lumen", "meadow", "nectar",
          "onyx", "prism", "quartz", "ripple", "saffron", "tundra", "umber",
          "violet", "willow", "xenon", "yarrow", "zephyr"]


def _random_tree_heads(t: int, pivot_depth: int | None, rng) -> list[int]:
    """Heads for a random attachment tree of t tokens (token 1 is root).

    When pivot_depth is given, the first pivot_depth+1 tokens form a chain so a
    node at exactly that depth exists, and later tokens pick heads uniformly
    among earlier tokens excluding the pivot, which keeps the pivot a leaf
    (its feature is then blurred by at most one neighbor during propagation).
    Without a pivot this is plain uniform attachment.
    """
    heads = [0]
    pivot_token = None if pivot_depth is None else pivot_depth + 1
    for i in range(2, t + 1):
        if pivot_token is not None and i <= pivot_token:
            heads.append(i - 1)
            continue
        choices = [h for h in range(1, i) if h != pivot_token]
        heads.append(int(choices[rng.integers(0, len(choices))]))
    return heads


def _sentence(heads: list[int], rng) -> SentenceParse:
    tokens = tuple(
        ParsedToken(index=i + 1, surface=_WORDS[int(rng.integers(0, len(_WORDS)))],
                    head=h, deprel="dep")
        for i, h in enumerate(heads)
    )
    return SentenceParse(tokens)


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def generate(spec: SyntheticSpec):
    """Build (records, examples, manifest) deterministically from the spec."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    d_e = spec.embedding_dim

    marker = copy_dir = None
    if d_e is not None:
        marker = rng.normal(size=d_e)
        marker /= np.linalg.norm(marker)
        raw = rng.normal(size=d_e)
        copy_dir = raw - (raw @ marker) * marker
        copy_dir /= np.linalg.norm(copy_dir)

    records, examples = [], []
    pivot_entropies, mean_entropies, labels = [], [], []
    for i in range(spec.num_records):
        n_sent = int(rng.integers(spec.sentences_min, spec.sentences_max + 1))
        sent_sizes = [int(rng.integers(spec.tokens_min, spec.tokens_max + 1))
                      for _ in range(n_sent)]
        sentences = []
        for s_idx, t in enumerate(sent_sizes):
            depth_req = spec.pivot_depth if s_idx == 0 else None
            sentences.append(_sentence(_random_tree_heads(t, depth_req, rng), rng))
        total = sum(sent_sizes)
        # pivot sits at document token index pivot_depth (chain head of sentence 1)
        pivot = spec.pivot_depth

        entropies = np.abs(rng.normal(ENTROPY_CENTER, spec.noise_scale, size=total))
        entropies[pivot] = abs(rng.normal(ENTROPY_CENTER, PIVOT_SPREAD * spec.noise_scale))
        probs = np.clip(np.exp(-entropies + 0.1 * rng.normal(size=total)), 1e-6, 1.0)
        e_pivot = float(entropies[pivot])
        p_correct = _sigmoid(spec.signal_strength * (ENTROPY_CENTER - e_pivot))
        label = int(rng.random() < p_correct)

        embeddings = None
        if d_e is not None:
            emb = EMBED_NOISE * rng.normal(size=(total, d_e))
            noisy_copy = (ENTROPY_CENTER - e_pivot) + COPY_NOISE * rng.normal()
            emb[pivot] += MARKER_STRENGTH * marker + COPY_GAIN * noisy_copy * copy_dir
            embeddings = [[float(x) for x in row] for row in emb]

        # score kept consistent with the label under the qa threshold (0.3)
        u = float(rng.random())
        score = 0.3 + 0.7 * u if label == 1 else 0.2999 * u
        response = " ".join(t.surface for s in sentences for t in s.tokens)
        rec = GenerationRecord(
            id=f"synth-{i:05d}",
            task="qa",
            prompt=f"synthetic question {i}",
            response=response,
            reference=response if label == 1 else "unrelated answer text",
            sentences=tuple(sentences),
            token_probs=[float(p) for p in probs],
            token_entropies=[float(h) for h in entropies],
            embeddings=embeddings,
            score=score,
        )
        records.append(rec)
        examples.append(LabeledExample(record_id=rec.id, score=score, label=label))
        pivot_entropies.append(e_pivot)
        mean_entropies.append(float(entropies.mean()))
        labels.append(label)

    manifest = {
        "spec": asdict(spec),
        "records": len(records),
        "positive_fraction": float(np.mean(labels)),
        "pivot_oracle_auroc": _logistic_oracle_auroc(pivot_entropies, labels),
        "mean_entropy_oracle_auroc": _logistic_oracle_auroc(mean_entropies, labels),
    }
    return records, examples, manifest


def _logistic_oracle_auroc(feature, labels) -> float:
    """AUROC of a one-feature logistic fit (gradient ascent on the likelihood)."""
    x = np.asarray(feature)
    y = np.asarray(labels)
    if len(set(labels)) < 2:
        return float("nan")
    xs = (x - x.mean()) / (x.std() + 1e-12)
    w, b = 0.0, 0.0
    for _ in range(500):
        p = 1.0 / (1.0 + np.exp(-(w * xs + b)))
        gw = float(((y - p) * xs).mean())
        gb = float((y - p).mean())
        w += 0.5 * gw
        b += 0.5 * gb
    p = 1.0 / (1.0 + np.exp(-(w * xs + b)))
    return auroc(ScoredSet.of(p.tolist(), y.tolist()))


def write_manifest(path, manifest: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
