"""Reference scorers the model is compared against.

AvgProb ranks by mean token probability; AvgEnt by negated min-max-normalized
mean entropy (so higher always means more confident); Sup trains a small
classifier on the eight sequence aggregates alone, without graph structure or
embeddings.
"""

from __future__ import annotations

import numpy as np

from .model import (GenuineModel, ModelConfig, NO_GRAPH, TrainSettings,
                    train)

AVG_PROB_IDX = 6   # column offsets inside AggregateFeatures.as_vector()
AVG_ENT_IDX = 2


def avg_prob_scores(instances) -> list[float]:
    return [float(inst.aggregates[0, AVG_PROB_IDX]) for inst in instances]


def avg_ent_scores(instances) -> list[float]:
    """1 - min-max-normalized mean entropy over the evaluated set."""
    ents = np.array([float(inst.aggregates[0, AVG_ENT_IDX]) for inst in instances])
    span = ents.max() - ents.min()
    if span <= 0:
        return [0.5] * len(instances)
    return [float(1.0 - (e - ents.min()) / span) for e in ents]


def train_sup_baseline(train_instances, val_instances, seed: int,
                       settings: TrainSettings | None = None) -> GenuineModel:
    """Aggregate-feature classifier; embeddings deliberately excluded."""
    config = ModelConfig(variant=NO_GRAPH, embedding_dim=None,
                         nograph_use_embeddings=False)
    settings = settings or TrainSettings(lr=0.01, max_epochs=100, patience=15)
    return train(config, train_instances, val_instances, seed, settings).model


def sup_scores(model: GenuineModel, instances) -> list[float]:
    return [model.predict(inst) for inst in instances]
