"""Experiment orchestration: runs, ablations, robustness and scaling sweeps.

Every run writes one JSON artifact plus a per-record prediction file under
the output directory; report() turns the artifacts into results.csv (metrics,
fully deterministic), timings.csv (wall clock, inherently not) and a
summary.txt with mean +/- std per experiment cell.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from . import baselines, corpus, metrics, synth
from .config import ExperimentConfig, load_synth_spec
from .model import (FULL, GREY_ONLY, NO_FUSION, NO_GRAPH, WHITE_ONLY,
                    GenuineModel, GraphInstance, ModelConfig, TrainSettings,
                    prepare_instances, train, with_labels)

RESULTS_COLUMNS = ["experiment", "variant", "graph_kind", "seed",
                   "auroc", "ece", "nll", "brier"]
ABLATION_VARIANTS = (FULL, NO_FUSION, NO_GRAPH, GREY_ONLY, WHITE_ONLY)


@dataclass(frozen=True)
class RunResult:
    experiment: str
    variant: str
    graph_kind: str
    seed: int
    auroc: float
    ece: float
    nll: float
    brier: float
    wall_seconds: float


class ExperimentError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# dataset plumbing

@dataclass
class Dataset:
    records: list
    examples: list
    instances: dict[str, list[GraphInstance]]   # per graph kind
    embedding_dim: int | None

    def instances_for(self, kind: str) -> list[GraphInstance]:
        return self.instances[kind]


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.dataset:
        records = corpus.read_records(cfg.dataset)
        examples = corpus.label_records(records)
    else:
        spec = load_synth_spec(cfg.synth_spec)
        records, examples, _ = synth.generate(spec)
    if not records:
        raise ExperimentError("dataset is empty")
    kinds = {cfg.graph_kind}
    instances = {k: prepare_instances(records, examples, k) for k in kinds}
    emb_dim = None
    if records[0].embeddings is not None:
        emb_dim = len(records[0].embeddings[0])
    return Dataset(records=records, examples=examples, instances=instances,
                   embedding_dim=emb_dim)


def _model_config(cfg: ExperimentConfig, variant: str, emb_dim: int | None,
                  base_nodes: int) -> ModelConfig:
    return ModelConfig(
        variant=variant, graph_kind=cfg.graph_kind, embedding_dim=emb_dim,
        hidden_dim=cfg.hidden_dim, clf_hidden=cfg.clf_hidden,
        num_layers=cfg.num_layers, keep_ratio=cfg.keep_ratio,
        base_nodes=base_nodes,
        nograph_use_embeddings=cfg.nograph_use_embeddings)


def _train_settings(cfg: ExperimentConfig) -> TrainSettings:
    return TrainSettings(lr=cfg.lr, batch_size=cfg.batch_size,
                         max_epochs=cfg.max_epochs, patience=cfg.patience)


def _split_instances(dataset: Dataset, cfg: ExperimentConfig, seed: int,
                     kind: str):
    spec = corpus.SplitSpec(cfg.train_fraction, cfg.val_fraction,
                            cfg.test_fraction, seed=seed)
    by_id = {inst.record_id: inst for inst in dataset.instances_for(kind)}
    train_recs, val_recs, test_recs = corpus.split_dataset(dataset.records, spec)
    pick = lambda recs: [by_id[r.id] for r in recs]
    return pick(train_recs), pick(val_recs), pick(test_recs)


# ---------------------------------------------------------------------------
# single runs

def run_single(dataset: Dataset, cfg: ExperimentConfig, seed: int, variant: str,
               experiment: str, outdir: Path, *, noise_ratio: float = 0.0,
               train_keep: float = 1.0) -> RunResult:
    """Train one variant on one seed's split and score the clean test set."""
    train_i, val_i, test_i = _split_instances(dataset, cfg, seed, cfg.graph_kind)
    if train_keep < 1.0:
        train_i = corpus.subsample_training(train_i, train_keep, seed=cfg.noise_seed + seed)
    if noise_ratio > 0.0:
        noisy = corpus.inject_label_noise(
            [corpus.LabeledExample(i.record_id, 0.0, i.label) for i in train_i],
            noise_ratio, seed=cfg.noise_seed + seed)
        train_i = with_labels(train_i, noisy)
    base_nodes = cfg.base_nodes or max(i.adjacency.shape[0] for i in train_i)
    emb_dim = dataset.embedding_dim
    if variant == GREY_ONLY:
        emb_dim = None
    mconfig = _model_config(cfg, variant, emb_dim, base_nodes)

    start = time.perf_counter()
    result = train(mconfig, train_i, val_i, seed, _train_settings(cfg))
    scores = [result.model.predict(inst) for inst in test_i]
    wall = time.perf_counter() - start
    return _finish_run(experiment, variant, cfg, seed, scores, test_i, wall, outdir)


def _finish_run(experiment, variant, cfg, seed, scores, test_i, wall, outdir) -> RunResult:
    labels = [inst.label for inst in test_i]
    m = metrics.evaluate(scores, labels)
    run = RunResult(experiment=experiment, variant=variant, graph_kind=cfg.graph_kind,
                    seed=seed, wall_seconds=wall, **m)
    _write_run_artifact(outdir, run, test_i, scores)
    return run


def _baseline_runs(dataset: Dataset, cfg: ExperimentConfig, seed: int,
                   experiment: str, outdir: Path) -> list[RunResult]:
    train_i, val_i, test_i = _split_instances(dataset, cfg, seed, cfg.graph_kind)
    out = []
    start = time.perf_counter()
    scores = baselines.avg_prob_scores(test_i)
    out.append(_finish_run(experiment, "avg_prob", cfg, seed, scores, test_i,
                           time.perf_counter() - start, outdir))
    start = time.perf_counter()
    scores = baselines.avg_ent_scores(test_i)
    out.append(_finish_run(experiment, "avg_ent", cfg, seed, scores, test_i,
                           time.perf_counter() - start, outdir))
    start = time.perf_counter()
    sup = baselines.train_sup_baseline(train_i, val_i, seed)
    scores = baselines.sup_scores(sup, test_i)
    out.append(_finish_run(experiment, "sup", cfg, seed, scores, test_i,
                           time.perf_counter() - start, outdir))
    return out


# ---------------------------------------------------------------------------
# experiment entry points

def run_experiment(cfg: ExperimentConfig, outdir=None) -> list[RunResult]:
    """Base protocol: per seed, train the configured variant plus baselines."""
    cfg.validate()
    outdir = _prepare_outdir(cfg, outdir)
    dataset = load_dataset(cfg)
    runs = []
    for seed in cfg.run_seeds:
        runs.append(run_single(dataset, cfg, seed, cfg.variant, "base", outdir))
        runs.extend(_baseline_runs(dataset, cfg, seed, "base", outdir))
    report(outdir)
    return runs


def run_ablation(cfg: ExperimentConfig, outdir=None) -> list[RunResult]:
    """All variants on identical per-seed splits for paired comparison."""
    cfg.validate()
    outdir = _prepare_outdir(cfg, outdir)
    dataset = load_dataset(cfg)
    if dataset.embedding_dim is None:
        raise ExperimentError("ablation needs a dataset with embeddings "
                              "(white-branch variants are part of the table)")
    runs = []
    for seed in cfg.run_seeds:
        for variant in ABLATION_VARIANTS:
            runs.append(run_single(dataset, cfg, seed, variant, "ablation", outdir))
    report(outdir)
    return runs


def run_robustness(cfg: ExperimentConfig, outdir=None) -> list[RunResult]:
    """Label-noise and training-size sweeps; corruption touches train only.

    The ratio-0 cell reuses the base-run code path bit for bit: noise_ratio=0
    changes nothing in the pipeline, so its rows must equal a base experiment
    run with the same config.
    """
    cfg.validate()
    outdir = _prepare_outdir(cfg, outdir)
    dataset = load_dataset(cfg)
    runs = []
    for ratio in cfg.noise_ratios:
        label = f"noise={_fmt(ratio)}"
        for seed in cfg.run_seeds:
            runs.append(run_single(dataset, cfg, seed, cfg.variant, label, outdir,
                                   noise_ratio=ratio))
    for fraction in cfg.train_fractions:
        label = f"trainsize={_fmt(fraction)}"
        for seed in cfg.run_seeds:
            runs.append(run_single(dataset, cfg, seed, cfg.variant, label, outdir,
                                   train_keep=fraction))
    report(outdir)
    return runs


def _random_graph(n: int, density: float, rng) -> np.ndarray:
    """Connected random 0/1 graph with ~density of all possible edges."""
    adjacency = np.zeros((n, n))
    for i in range(1, n):                      # random spanning tree
        j = int(rng.integers(0, i))
        adjacency[i, j] = adjacency[j, i] = 1.0
    want = int(round(density * n * (n - 1) / 2))
    extra = want - (n - 1)
    if extra > 0:
        iu, ju = np.triu_indices(n, k=1)
        free = [(int(a), int(b)) for a, b in zip(iu, ju) if adjacency[a, b] == 0]
        take = rng.choice(len(free), size=min(extra, len(free)), replace=False)
        for idx in take:
            a, b = free[int(idx)]
            adjacency[a, b] = adjacency[b, a] = 1.0
    return adjacency


def _scaling_instances(n: int, density: float, count: int, d_e: int, rng):
    out = []
    for g in range(count):
        adjacency = _random_graph(n, density, rng)
        ent = np.abs(rng.normal(1.0, 0.5, size=n))
        probs = np.clip(np.exp(-ent), 1e-6, 1.0)
        x_white = rng.normal(size=(n, d_e))
        agg = np.abs(rng.normal(size=(1, 8)))
        out.append(GraphInstance(
            record_id=f"scale-{n}-{g}", label=int(rng.integers(0, 2)),
            adjacency=adjacency, x_grey=np.column_stack([probs, ent]),
            x_white=x_white, aggregates=agg,
            mean_embedding=x_white.mean(axis=0, keepdims=True)))
    return out


def run_scaling(cfg: ExperimentConfig, outdir=None) -> list[dict]:
    """Wall time per training epoch across node counts and densities."""
    cfg.validate()
    outdir = _prepare_outdir(cfg, outdir)
    rng = np.random.default_rng(cfg.run_seeds[0])
    rows = []
    cells = [(n, cfg.scaling_fixed_density) for n in cfg.scaling_node_counts]
    cells += [(cfg.scaling_fixed_nodes, d) for d in cfg.scaling_densities]
    for n, dens in cells:
        instances = _scaling_instances(n, dens, cfg.scaling_graphs, 8, rng)
        mconfig = _model_config(cfg, cfg.variant, 8, base_nodes=n)
        settings = TrainSettings(lr=cfg.lr, batch_size=cfg.batch_size,
                                 max_epochs=cfg.scaling_epochs, patience=cfg.scaling_epochs)
        start = time.perf_counter()
        train(mconfig, instances, [], cfg.run_seeds[0], settings)
        per_epoch = (time.perf_counter() - start) / max(1, cfg.scaling_epochs)
        rows.append({"nodes": n, "density": dens, "seconds_per_epoch": per_epoch})
    with open(Path(outdir) / "scaling.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["nodes", "density", "seconds_per_epoch"])
        writer.writeheader()
        writer.writerows(rows)
    return rows


# ---------------------------------------------------------------------------
# artifacts and reporting

def _fmt(x: float) -> str:
    return np.format_float_positional(x, trim="-")


def _prepare_outdir(cfg: ExperimentConfig, outdir) -> Path:
    path = Path(outdir if outdir is not None else cfg.resolved_output_dir())
    (path / "runs").mkdir(parents=True, exist_ok=True)
    (path / "predictions").mkdir(parents=True, exist_ok=True)
    return path


def _run_key(run: RunResult) -> str:
    return f"{run.experiment}__{run.variant}__{run.graph_kind}__seed{run.seed}"


def _write_run_artifact(outdir: Path, run: RunResult, test_i, scores):
    key = _run_key(run)
    with open(outdir / "runs" / f"{key}.json", "w", encoding="utf-8") as fh:
        json.dump(asdict(run), fh, indent=2)
        fh.write("\n")
    with open(outdir / "predictions" / f"{key}.csv", "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["record_id", "score", "label"])
        for inst, score in zip(test_i, scores):
            writer.writerow([inst.record_id, repr(float(score)), inst.label])


def load_runs(outdir) -> list[RunResult]:
    runs = []
    for path in sorted(Path(outdir, "runs").glob("*.json")):
        with open(path, encoding="utf-8") as fh:
            runs.append(RunResult(**json.load(fh)))
    return runs


def report(outdir) -> Path:
    """Rebuild results.csv, timings.csv and summary.txt from run artifacts.

    Metric values are written with repr() so parsing them back reproduces the
    in-memory floats exactly; rows are sorted for byte-stable output.
    """
    outdir = Path(outdir)
    runs = sorted(load_runs(outdir), key=lambda r: (r.experiment, r.variant,
                                                    r.graph_kind, r.seed))
    results_path = outdir / "results.csv"
    with open(results_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULTS_COLUMNS)
        for run in runs:
            writer.writerow([run.experiment, run.variant, run.graph_kind, run.seed,
                             repr(run.auroc), repr(run.ece), repr(run.nll),
                             repr(run.brier)])
    with open(outdir / "timings.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["experiment", "variant", "graph_kind", "seed", "wall_seconds"])
        for run in runs:
            writer.writerow([run.experiment, run.variant, run.graph_kind, run.seed,
                             repr(run.wall_seconds)])
    _write_summary(outdir / "summary.txt", runs)
    return results_path


def _write_summary(path, runs):
    cells = {}
    for run in runs:
        cells.setdefault((run.experiment, run.variant, run.graph_kind), []).append(run)
    lines = []
    for (experiment, variant, kind), cell in sorted(cells.items()):
        rms = [metrics.RunMetrics(r.seed, r.auroc, r.ece, r.nll, r.brier) for r in cell]
        agg = metrics.aggregate_runs(rms)
        stats = "  ".join(f"{name}={agg.mean[name]:.4f}±{agg.std[name]:.4f}"
                          for name in ("auroc", "ece", "nll", "brier"))
        lines.append(f"{experiment:<18} {variant:<10} {kind:<4} runs={len(cell)}  {stats}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_results_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for row in reader:
            parsed = dict(row)
            parsed["seed"] = int(row["seed"])
            for key in ("auroc", "ece", "nll", "brier"):
                parsed[key] = float(row[key])
            rows.append(parsed)
    return rows
