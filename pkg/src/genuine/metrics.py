"""Evaluation metrics for confidence scores: AUROC, ECE, NLL, Brier."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MetricUndefinedError(ValueError):
    """Raised when a metric has no defined value (e.g. single-class AUROC)."""


@dataclass(frozen=True)
class ScoredSet:
    scores: tuple[float, ...]
    labels: tuple[int, ...]

    @classmethod
    def of(cls, scores, labels) -> "ScoredSet":
        scores = tuple(float(s) for s in scores)
        labels = tuple(int(y) for y in labels)
        if len(scores) != len(labels) or not scores:
            raise ValueError("scores and labels must be parallel and non-empty")
        if any(y not in (0, 1) for y in labels):
            raise ValueError("labels must be 0/1")
        return cls(scores, labels)


def auroc(scored: ScoredSet) -> float:
    """Mann-Whitney statistic: ties between a positive and a negative count 0.5."""
    y = np.asarray(scored.labels)
    s = np.asarray(scored.scores)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise MetricUndefinedError("AUROC needs at least one positive and one negative label")
    order = np.argsort(s, kind="stable")
    ranks = np.empty(len(s))
    ranks[order] = np.arange(1, len(s) + 1)
    # average ranks over tied scores
    sorted_scores = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        if j > i:
            ranks[order[i:j + 1]] = (i + j + 2) / 2.0
        i = j + 1
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def ece(scored: ScoredSet, bins: int = 10) -> float:
    """Equal-width confidence bins, right-closed with score 0 in the bottom bin."""
    s = np.asarray(scored.scores)
    y = np.asarray(scored.labels, dtype=np.float64)
    if np.any(s < 0) or np.any(s > 1):
        raise ValueError("ECE needs scores in [0,1]")
    idx = np.clip(np.ceil(s * bins).astype(int) - 1, 0, bins - 1)
    total = 0.0
    n = len(s)
    for b in range(bins):
        mask = idx == b
        count = int(mask.sum())
        if count == 0:
            continue
        acc = y[mask].mean()
        conf = s[mask].mean()
        total += (count / n) * abs(acc - conf)
    return float(total)


def nll(scored: ScoredSet) -> float:
    """Mean negative log-likelihood with scores clipped to [1e-12, 1-1e-12]."""
    s = np.clip(np.asarray(scored.scores), 1e-12, 1.0 - 1e-12)
    y = np.asarray(scored.labels)
    return float(-(np.where(y == 1, np.log(s), np.log1p(-s))).mean())


def brier(scored: ScoredSet) -> float:
    s = np.asarray(scored.scores)
    y = np.asarray(scored.labels, dtype=np.float64)
    return float(((s - y) ** 2).mean())


@dataclass(frozen=True)
class RunMetrics:
    seed: int
    auroc: float
    ece: float
    nll: float
    brier: float


@dataclass(frozen=True)
class EvalReport:
    runs: tuple[RunMetrics, ...]
    mean: dict[str, float]
    std: dict[str, float]

    @property
    def seeds(self):
        return [r.seed for r in self.runs]


def evaluate(scores, labels) -> dict[str, float]:
    scored = ScoredSet.of(scores, labels)
    return {"auroc": auroc(scored), "ece": ece(scored), "nll": nll(scored),
            "brier": brier(scored)}


def aggregate_runs(runs) -> EvalReport:
    """Mean and sample std (n-1 denominator; 0 for a single run) per metric."""
    runs = tuple(runs)
    if not runs:
        raise ValueError("aggregate_runs needs at least one run")
    mean, std = {}, {}
    for key in ("auroc", "ece", "nll", "brier"):
        vals = np.array([getattr(r, key) for r in runs])
        mean[key] = float(vals.mean())
        std[key] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
    return EvalReport(runs=runs, mean=mean, std=std)
