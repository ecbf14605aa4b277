"""Dual-branch hierarchical pooling model over token graphs.

Per pooling layer, each feature branch (grey: probability/entropy, white:
embeddings) runs one GNN step for node embeddings and one for soft cluster
assignments; the branch assignments are fused entrywise by learnable scalars
into a single column-stochastic assignment that coarsens features, branch
features and the adjacency for the next layer. Readout concatenates the mean
and max of the final cluster features into a small classifier producing
(p_wrong, p_correct). The max component matters: column-stochastic
assignments conserve feature mass, so a mean alone is invariant to the last
layer's routing.

Assignment matrices are k x n with columns summing to 1: each original node
distributes unit membership over the clusters of the next level.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, asdict, replace

import numpy as np

from . import autodiff as ad
from .autodiff import (Tape, Variable, constant, parameter, relu, col_softmax,
                       row_softmax, transpose, mean_rows, max_rows, concat_cols,
                       slice_cols, symmetrize, sym_normalize, mul_scalar,
                       add_scalar, reciprocal, scale_rows, softmax_cross_entropy)
from .features import aggregate, build_node_features, token_features
from .graphs import document_graph
from .metrics import MetricUndefinedError, ScoredSet, auroc

FULL = "full"
GREY_ONLY = "grey_only"
WHITE_ONLY = "white_only"
NO_FUSION = "no_fusion"
NO_GRAPH = "no_graph"
VARIANTS = (FULL, GREY_ONLY, WHITE_ONLY, NO_FUSION, NO_GRAPH)

GREY_DIM = 2


class ModelConfigError(ValueError):
    pass


class DegenerateScheduleWarning(UserWarning):
    """A graph had fewer nodes than the scheduled cluster count."""


@dataclass(frozen=True)
class PoolingSchedule:
    num_layers: int
    keep_ratio: float
    cluster_counts: tuple[int, ...]

    @classmethod
    def build(cls, num_layers: int, keep_ratio: float, base_nodes: int) -> "PoolingSchedule":
        if not 1 <= num_layers <= 4:
            raise ModelConfigError(f"num_layers must be in 1..4, got {num_layers}")
        if not 0.0 < keep_ratio <= 1.0:
            raise ModelConfigError(f"keep_ratio must lie in (0,1], got {keep_ratio}")
        if base_nodes < 1:
            raise ModelConfigError(f"base_nodes must be >= 1, got {base_nodes}")
        counts = []
        n = base_nodes
        for _ in range(num_layers):
            n = max(1, math.ceil(keep_ratio * n))
            counts.append(n)
        return cls(num_layers=num_layers, keep_ratio=keep_ratio, cluster_counts=tuple(counts))


@dataclass(frozen=True)
class ModelConfig:
    variant: str = FULL
    graph_kind: str = "dpt"
    embedding_dim: int | None = None
    hidden_dim: int = 16
    clf_hidden: int = 16
    num_layers: int = 2
    keep_ratio: float = 0.5
    base_nodes: int = 32
    nograph_use_embeddings: bool = True
    aux_link_weight: float = 0.0
    aux_entropy_weight: float = 0.0

    def validate(self):
        if self.variant not in VARIANTS:
            raise ModelConfigError(f"unknown variant {self.variant!r}")
        if self.variant in (WHITE_ONLY, NO_FUSION) and self.embedding_dim is None:
            raise ModelConfigError(f"variant {self.variant!r} needs embeddings; none configured")
        PoolingSchedule.build(self.num_layers, self.keep_ratio, self.base_nodes)


@dataclass
class GraphInstance:
    """One record prepared for training/prediction: graph + feature matrices."""
    record_id: str
    label: int
    adjacency: np.ndarray
    x_grey: np.ndarray
    x_white: np.ndarray | None
    aggregates: np.ndarray        # 1 x 8
    mean_embedding: np.ndarray | None


@dataclass
class FeatureScaler:
    """Per-column standardization fitted on the training split.

    Small-magnitude inputs stall training badly under the uniform(-0.1, 0.1)
    parameter init, so features are z-scored before entering the network; the
    statistics ship with the model so prediction applies the same transform.
    """
    grey_mean: np.ndarray
    grey_std: np.ndarray
    agg_mean: np.ndarray
    agg_std: np.ndarray
    white_mean: np.ndarray | None
    white_std: np.ndarray | None

    @classmethod
    def fit(cls, instances) -> "FeatureScaler":
        grey = np.vstack([inst.x_grey for inst in instances])
        agg = np.vstack([inst.aggregates for inst in instances])
        whites = [inst.x_white for inst in instances if inst.x_white is not None]
        white = np.vstack(whites) if whites else None
        guard = lambda s: np.where(s < 1e-12, 1.0, s)
        return cls(
            grey_mean=grey.mean(axis=0), grey_std=guard(grey.std(axis=0)),
            agg_mean=agg.mean(axis=0), agg_std=guard(agg.std(axis=0)),
            white_mean=white.mean(axis=0) if white is not None else None,
            white_std=guard(white.std(axis=0)) if white is not None else None,
        )

    @classmethod
    def identity(cls, d_white: int | None = None) -> "FeatureScaler":
        one = lambda d: (np.zeros(d), np.ones(d))
        gm, gs = one(GREY_DIM)
        am, as_ = one(8)
        wm, ws = one(d_white) if d_white is not None else (None, None)
        return cls(gm, gs, am, as_, wm, ws)

    def grey(self, x):
        return (x - self.grey_mean) / self.grey_std

    def white(self, x):
        if self.white_mean is None:
            raise ModelConfigError("scaler was fitted without embeddings")
        return (x - self.white_mean) / self.white_std

    def agg(self, x):
        return (x - self.agg_mean) / self.agg_std

    def to_arrays(self) -> dict[str, np.ndarray]:
        out = {"scaler.grey_mean": self.grey_mean, "scaler.grey_std": self.grey_std,
               "scaler.agg_mean": self.agg_mean, "scaler.agg_std": self.agg_std}
        if self.white_mean is not None:
            out["scaler.white_mean"] = self.white_mean
            out["scaler.white_std"] = self.white_std
        return out

    @classmethod
    def from_arrays(cls, arrays: dict[str, np.ndarray]) -> "FeatureScaler":
        return cls(
            grey_mean=arrays["scaler.grey_mean"], grey_std=arrays["scaler.grey_std"],
            agg_mean=arrays["scaler.agg_mean"], agg_std=arrays["scaler.agg_std"],
            white_mean=arrays.get("scaler.white_mean"),
            white_std=arrays.get("scaler.white_std"),
        )


def prepare_instance(record, label: int, graph_kind: str) -> GraphInstance:
    graph = document_graph(record, graph_kind)
    feats = build_node_features(record, graph)
    agg = aggregate(token_features(record)).as_vector()
    mean_emb = feats.x_white.mean(axis=0, keepdims=True) if feats.x_white is not None else None
    return GraphInstance(record_id=record.id, label=label, adjacency=graph.adjacency,
                         x_grey=feats.x_grey, x_white=feats.x_white,
                         aggregates=agg, mean_embedding=mean_emb)


def prepare_instances(records, examples, graph_kind: str) -> list[GraphInstance]:
    labels = {ex.record_id: ex.label for ex in examples}
    return [prepare_instance(rec, labels[rec.id], graph_kind) for rec in records]


def with_labels(instances, examples) -> list[GraphInstance]:
    """Copies of instances with labels replaced (arrays shared)."""
    labels = {ex.record_id: ex.label for ex in examples}
    return [replace(inst, label=labels[inst.record_id]) for inst in instances]


# ---------------------------------------------------------------------------
# building-block operations

def gnn(ahat: Variable, x: Variable, w: Variable, activation: bool = True) -> Variable:
    """One propagation step: optionally ReLU(ahat @ x @ w)."""
    out = (ahat @ x) @ w
    return relu(out) if activation else out


def assignment(ahat: Variable, x: Variable, w_assign: Variable, k: int) -> Variable:
    """Soft assignment of n nodes onto k clusters; columns sum to 1.

    Cluster logits come from a linear GNN step; if the graph has fewer nodes
    than scheduled clusters, the count is clamped with a warning.
    """
    n = ahat.shape[0]
    k_sched = w_assign.shape[1]
    k = min(k, k_sched)
    if k > n:
        warnings.warn(f"cluster count {k} clamped to {n} nodes", DegenerateScheduleWarning,
                      stacklevel=2)
        k = n
    logits = gnn(ahat, x, w_assign, activation=False)
    if k < k_sched:
        logits = slice_cols(logits, k)
    return col_softmax(transpose(logits))


def coarsen(s: Variable, z: Variable, a: Variable) -> tuple[Variable, Variable]:
    """Pool features and adjacency one level: X' = S Z, A' = S A S^T.

    A' is formed as 0.5 (M + M^T), which equals S A S^T exactly for symmetric
    A and keeps the result symmetric to the last bit.
    """
    x_next = s @ z
    m = (s @ a) @ transpose(s)
    return x_next, symmetrize(m)


def fuse(s_grey: Variable, s_white: Variable, a: Variable, b: Variable,
         c: Variable) -> Variable:
    """Entrywise affine combination of two assignments, re-softmaxed per column."""
    if s_grey.shape != s_white.shape:
        raise ad.ShapeError(f"fuse: assignment shapes differ: {s_grey.shape} vs {s_white.shape}")
    g = add_scalar(mul_scalar(s_grey, a) + mul_scalar(s_white, b), c)
    return col_softmax(g)


# ---------------------------------------------------------------------------
# the model

def _branches(cfg: ModelConfig) -> list[str]:
    if cfg.variant == NO_GRAPH:
        return []
    if cfg.variant == GREY_ONLY:
        return ["grey"]
    if cfg.variant == WHITE_ONLY:
        return ["white"]
    if cfg.variant == NO_FUSION:
        return ["joint"]
    # full: white branch only when the data carries embeddings
    return ["grey", "white"] if cfg.embedding_dim is not None else ["grey"]


def _branch_dim(cfg: ModelConfig, branch: str) -> int:
    if branch == "grey":
        return GREY_DIM
    if branch == "white":
        return cfg.embedding_dim
    return GREY_DIM + cfg.embedding_dim  # joint


def _star_dim(cfg: ModelConfig) -> int:
    if cfg.variant == WHITE_ONLY:
        return cfg.embedding_dim
    if cfg.variant == NO_FUSION:
        return GREY_DIM + cfg.embedding_dim
    if cfg.variant == FULL and cfg.embedding_dim is not None:
        return GREY_DIM + cfg.embedding_dim
    return GREY_DIM


def _flat_dim(cfg: ModelConfig) -> int:
    d = 8
    if cfg.nograph_use_embeddings and cfg.embedding_dim is not None:
        d += cfg.embedding_dim
    return d


class GenuineModel:
    """Holds parameters, feature scaling and the forward pass for one variant."""

    def __init__(self, config: ModelConfig, params: dict[str, Variable],
                 scaler: FeatureScaler | None = None):
        config.validate()
        self.config = config
        self.params = params
        self.scaler = scaler if scaler is not None else FeatureScaler.identity(config.embedding_dim)
        self.schedule = PoolingSchedule.build(config.num_layers, config.keep_ratio,
                                              config.base_nodes)

    # parameter init order is fixed so variants sharing a seed share draws:
    # per layer (branches in declared order: Wz then Ws), then fusion scalars,
    # then the readout-path weights, then the classifier.
    @classmethod
    def init(cls, config: ModelConfig, seed: int) -> "GenuineModel":
        config.validate()
        rng = np.random.default_rng(seed)
        draw = lambda *shape: rng.uniform(-0.1, 0.1, size=shape)
        params: dict[str, Variable] = {}

        def p(name, *shape):
            params[name] = parameter(draw(*shape), name=name)

        schedule = PoolingSchedule.build(config.num_layers, config.keep_ratio,
                                         config.base_nodes)
        branches = _branches(config)
        if config.variant == NO_GRAPH:
            f = _flat_dim(config)
            p("clf.W1", f, config.clf_hidden)
            p("clf.b1", 1, config.clf_hidden)
            p("clf.W2", config.clf_hidden, 2)
            p("clf.b2", 1, 2)
            return cls(config, params)

        h = config.hidden_dim
        fused = len(branches) == 2
        for layer, k in enumerate(schedule.cluster_counts):
            d_in = {b: (_branch_dim(config, b) if layer == 0 else h) for b in branches}
            for b in branches:
                p(f"{b}.l{layer}.Wz", d_in[b], h)
                p(f"{b}.l{layer}.Ws", d_in[b], k)
            if fused:
                # neutral gate init: start from the plain branch average so
                # both assignment matrices contribute gradient from step one
                params[f"fuse.l{layer}.a"] = parameter([[1.0]], name=f"fuse.l{layer}.a")
                params[f"fuse.l{layer}.b"] = parameter([[1.0]], name=f"fuse.l{layer}.b")
                params[f"fuse.l{layer}.c"] = parameter([[0.0]], name=f"fuse.l{layer}.c")
            d_star = _star_dim(config) if layer == 0 else h
            p(f"star.l{layer}.Wz", d_star, h)
        p("clf.W1", 2 * h, config.clf_hidden)
        p("clf.b1", 1, config.clf_hidden)
        p("clf.W2", config.clf_hidden, 2)
        p("clf.b2", 1, 2)
        return cls(config, params)

    def parameters(self) -> list[Variable]:
        return list(self.params.values())

    # ------------------------------------------------------------------
    def _flat_input(self, inst: GraphInstance) -> np.ndarray:
        parts = [self.scaler.agg(inst.aggregates)]
        if self.config.nograph_use_embeddings and self.config.embedding_dim is not None:
            if inst.mean_embedding is None:
                raise ModelConfigError(
                    f"record {inst.record_id!r} has no embeddings but the model expects them")
            parts.append(self.scaler.white(inst.mean_embedding))
        return np.hstack(parts)

    def _star_input(self, inst: GraphInstance) -> np.ndarray:
        cfg = self.config
        if cfg.variant == WHITE_ONLY:
            return self.scaler.white(inst.x_white)
        with_white = cfg.variant == NO_FUSION or (
            cfg.variant == FULL and cfg.embedding_dim is not None)
        if with_white:
            return np.hstack([self.scaler.grey(inst.x_grey), self.scaler.white(inst.x_white)])
        return self.scaler.grey(inst.x_grey)

    def _branch_input(self, inst: GraphInstance, branch: str) -> np.ndarray:
        if branch == "grey":
            return self.scaler.grey(inst.x_grey)
        if branch == "white":
            return self.scaler.white(inst.x_white)
        return np.hstack([self.scaler.grey(inst.x_grey), self.scaler.white(inst.x_white)])

    def _classify(self, pooled: Variable) -> Variable:
        h = relu(pooled @ self.params["clf.W1"] + self.params["clf.b1"])
        return h @ self.params["clf.W2"] + self.params["clf.b2"]

    def forward_logits(self, inst: GraphInstance, collect_aux: list | None = None) -> Variable:
        cfg = self.config
        branches = _branches(cfg)
        for b in branches:
            if b != "grey" and inst.x_white is None:
                raise ModelConfigError(
                    f"variant {cfg.variant!r} needs embeddings; record {inst.record_id!r} has none")
        if cfg.variant == NO_GRAPH:
            return self._classify(constant(self._flat_input(inst)))

        a = constant(inst.adjacency)
        xs = {b: constant(self._branch_input(inst, b)) for b in branches}
        x_star = constant(self._star_input(inst))
        fused = len(branches) == 2
        for layer, k in enumerate(self.schedule.cluster_counts):
            ahat = sym_normalize(a)
            zs, ss = {}, {}
            for b in branches:
                zs[b] = gnn(ahat, xs[b], self.params[f"{b}.l{layer}.Wz"])
                ss[b] = assignment(ahat, xs[b], self.params[f"{b}.l{layer}.Ws"], k)
            if fused:
                s_star = fuse(ss["grey"], ss["white"],
                              self.params[f"fuse.l{layer}.a"],
                              self.params[f"fuse.l{layer}.b"],
                              self.params[f"fuse.l{layer}.c"])
            else:
                s_star = ss[branches[0]]
            z_star = gnn(ahat, x_star, self.params[f"star.l{layer}.Wz"])
            if collect_aux is not None:
                collect_aux.append((s_star, a))
            x_star, a_next = coarsen(s_star, z_star, a)
            for b in branches:
                xs[b] = s_star @ zs[b]
            a = a_next
            last_s = s_star
        # cluster features are mass-weighted sums; the second readout half
        # divides by cluster mass so a lone node's features stay readable
        masses = last_s @ constant(np.ones((last_s.shape[1], 1)))
        inv_mass = reciprocal(masses + constant(np.full((masses.shape[0], 1), 1e-6)))
        pooled = concat_cols(mean_rows(x_star), max_rows(scale_rows(x_star, inv_mass)))
        return self._classify(pooled)

    def forward(self, inst: GraphInstance) -> Variable:
        """Probabilities (p_wrong, p_correct) as a 1x2 row."""
        return row_softmax(self.forward_logits(inst))

    def loss(self, inst: GraphInstance, weight: float = 1.0) -> Variable:
        cfg = self.config
        aux_pairs: list | None = []
        if cfg.aux_link_weight == 0.0 and cfg.aux_entropy_weight == 0.0:
            aux_pairs = None
        logits = self.forward_logits(inst, collect_aux=aux_pairs)
        total = softmax_cross_entropy(logits, inst.label)
        if aux_pairs:
            for s_star, a in aux_pairs:
                n = a.shape[0]
                if cfg.aux_link_weight > 0.0:
                    diff = transpose(s_star) @ s_star - a
                    total = total + (cfg.aux_link_weight / (n * n)) * ad.sum_all(diff * diff)
                if cfg.aux_entropy_weight > 0.0:
                    ent = ad.scale(ad.sum_all(s_star * ad.log(add_scalar(
                        s_star, constant([[1e-12]])))), -1.0 / n)
                    total = total + cfg.aux_entropy_weight * ent
        return ad.scale(total, weight) if weight != 1.0 else total

    def predict(self, inst: GraphInstance) -> float:
        """Confidence that the response is correct (second output component)."""
        return float(self.forward(inst).value[0, 1])

    def predict_record(self, record) -> float:
        inst = prepare_instance(record, label=0, graph_kind=self.config.graph_kind)
        return self.predict(inst)

    # ------------------------------------------------------------------
    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: var.value.copy() for name, var in self.params.items()}

    def restore(self, snap: dict[str, np.ndarray]):
        for name, value in snap.items():
            self.params[name].value = value.copy()

    def save(self, path):
        arrays = {k: v.value for k, v in self.params.items()}
        arrays.update(self.scaler.to_arrays())
        ad.save_params(path, arrays, meta={"config": asdict(self.config)})

    @classmethod
    def load(cls, path) -> "GenuineModel":
        named, meta = ad.load_params(path)
        config = ModelConfig(**dict(meta["config"]))
        scaler = FeatureScaler.from_arrays(
            {k: v for k, v in named.items() if k.startswith("scaler.")})
        params = {name: parameter(value, name=name)
                  for name, value in named.items() if not name.startswith("scaler.")}
        return cls(config, params, scaler)


# ---------------------------------------------------------------------------
# training

@dataclass(frozen=True)
class TrainSettings:
    lr: float = 1e-3
    batch_size: int = 16
    max_epochs: int = 200
    patience: int = 10


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_score: float


@dataclass
class TrainResult:
    model: GenuineModel
    history: list[EpochStats] = field(default_factory=list)
    best_epoch: int = -1


def _validation_score(model: GenuineModel, val_instances) -> float:
    """Validation AUROC; falls back to negated mean loss when single-class."""
    scores = [model.predict(inst) for inst in val_instances]
    labels = [inst.label for inst in val_instances]
    try:
        return auroc(ScoredSet.of(scores, labels))
    except MetricUndefinedError:
        probs = np.clip(np.asarray(scores), 1e-12, 1 - 1e-12)
        y = np.asarray(labels)
        return float(np.where(y == 1, np.log(probs), np.log1p(-probs)).mean())


def train(config: ModelConfig, train_instances, val_instances, seed: int,
          settings: TrainSettings = TrainSettings()) -> TrainResult:
    """Adam on mean cross-entropy with per-graph gradient accumulation.

    Parameters start from seeded uniform(-0.1, 0.1); early stopping tracks
    validation AUROC with the configured patience and the best-validation
    snapshot is restored at the end.
    """
    if not train_instances:
        raise ValueError("empty training set")
    labels = {inst.label for inst in train_instances}
    if len(labels) < 2:
        warnings.warn("training set has a single class; training proceeds", UserWarning)

    model = GenuineModel.init(config, seed)
    model.scaler = FeatureScaler.fit(train_instances)
    result = TrainResult(model=model)
    if settings.max_epochs == 0:
        return result

    opt = ad.Adam(model.parameters(), lr=settings.lr)
    shuffle_rng = np.random.default_rng((seed, 0x5EED))
    best_snap = model.snapshot()
    best_score = -np.inf
    stale = 0
    for epoch in range(settings.max_epochs):
        order = shuffle_rng.permutation(len(train_instances))
        epoch_loss = 0.0
        for start in range(0, len(order), settings.batch_size):
            batch = order[start:start + settings.batch_size]
            ad.zero_grad(model.parameters())
            for idx in batch:
                with Tape() as tape:
                    loss = model.loss(train_instances[idx], weight=1.0 / len(batch))
                    tape.backward(loss)
                epoch_loss += loss.item() * len(batch)
            opt.step()
        val_score = (_validation_score(model, val_instances)
                     if val_instances else -epoch_loss)
        result.history.append(EpochStats(epoch=epoch,
                                         train_loss=epoch_loss / len(train_instances),
                                         val_score=val_score))
        if val_score > best_score:
            best_score = val_score
            best_snap = model.snapshot()
            result.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= settings.patience:
                break
    model.restore(best_snap)
    return result
