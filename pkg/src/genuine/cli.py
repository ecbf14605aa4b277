"""Command-line entry points.

Subcommands: ingest, synth, train, eval, ablate, robustness, scaling, report.
Exit code 0 on success; failures print a categorized message to stderr and
exit nonzero.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import corpus, experiments, metrics, synth
from .config import ConfigError, load_experiment_config, load_synth_spec
from .corpus import CorpusError
from .model import GenuineModel, prepare_instances, train as train_model


def _cmd_ingest(args) -> int:
    errors = corpus.validate_file(args.path)
    if errors:
        for err in errors:
            print(f"invalid record: {err}", file=sys.stderr)
        print(f"{args.path}: {len(errors)} invalid record(s)", file=sys.stderr)
        return 1
    records = corpus.read_records(args.path)
    print(f"{args.path}: {len(records)} records OK")
    return 0


def _cmd_synth(args) -> int:
    spec = load_synth_spec(args.spec)
    records, _, manifest = synth.generate(spec)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    corpus.write_records(outdir / "records.jsonl", records)
    synth.write_manifest(outdir / "manifest.json", manifest)
    print(f"wrote {len(records)} records to {outdir / 'records.jsonl'}")
    print(f"pivot oracle AUROC {manifest['pivot_oracle_auroc']:.4f}, "
          f"mean-entropy oracle AUROC {manifest['mean_entropy_oracle_auroc']:.4f}")
    return 0


def _cmd_train(args) -> int:
    cfg = load_experiment_config(args.config)
    dataset = experiments.load_dataset(cfg)
    seed = cfg.run_seeds[0]
    train_i, val_i, test_i = experiments._split_instances(dataset, cfg, seed, cfg.graph_kind)
    base_nodes = cfg.base_nodes or max(i.adjacency.shape[0] for i in train_i)
    emb_dim = dataset.embedding_dim if cfg.variant != "grey_only" else None
    mconfig = experiments._model_config(cfg, cfg.variant, emb_dim, base_nodes)
    result = train_model(mconfig, train_i, val_i, seed, experiments._train_settings(cfg))
    outdir = Path(cfg.resolved_output_dir())
    outdir.mkdir(parents=True, exist_ok=True)
    ckpt = outdir / "checkpoint.npz"
    result.model.save(ckpt)
    with open(outdir / "history.csv", "w", encoding="utf-8") as fh:
        fh.write("epoch,train_loss,val_score\n")
        for h in result.history:
            fh.write(f"{h.epoch},{h.train_loss!r},{h.val_score!r}\n")
    print(f"saved checkpoint to {ckpt} (best epoch {result.best_epoch})")
    return 0


def _cmd_eval(args) -> int:
    cfg = load_experiment_config(args.config)
    model = GenuineModel.load(args.checkpoint)
    dataset = experiments.load_dataset(cfg)
    seed = cfg.run_seeds[0]
    _, _, test_i = experiments._split_instances(dataset, cfg, seed, model.config.graph_kind)
    scores = [model.predict(inst) for inst in test_i]
    m = metrics.evaluate(scores, [inst.label for inst in test_i])
    for name in ("auroc", "ece", "nll", "brier"):
        print(f"{name} {m[name]:.6f}")
    return 0


def _cmd_ablate(args) -> int:
    cfg = load_experiment_config(args.config)
    runs = experiments.run_ablation(cfg)
    print(f"wrote {len(runs)} runs to {cfg.resolved_output_dir()}")
    return 0


def _cmd_robustness(args) -> int:
    cfg = load_experiment_config(args.config)
    runs = experiments.run_robustness(cfg)
    print(f"wrote {len(runs)} runs to {cfg.resolved_output_dir()}")
    return 0


def _cmd_scaling(args) -> int:
    cfg = load_experiment_config(args.config)
    rows = experiments.run_scaling(cfg)
    print(f"wrote {len(rows)} timing rows to {cfg.resolved_output_dir()}")
    return 0


def _cmd_run(args) -> int:
    cfg = load_experiment_config(args.config)
    runs = experiments.run_experiment(cfg)
    print(f"wrote {len(runs)} runs to {cfg.resolved_output_dir()}")
    return 0


def _cmd_report(args) -> int:
    path = experiments.report(args.dir)
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="genuine",
                                     description="graph-based uncertainty estimation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a .jsonl record file")
    p.add_argument("path")
    p.set_defaults(fn=_cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("train", help="train one model and save a checkpoint")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("run", help="run the base experiment (model + baselines)")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("ablate", help="run the variant ablation")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=_cmd_ablate)

    p = sub.add_parser("robustness", help="label-noise and train-size sweeps")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=_cmd_robustness)

    p = sub.add_parser("scaling", help="timing sweep over graph size and density")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=_cmd_scaling)

    p = sub.add_parser("report", help="rebuild results.csv/summary.txt from run artifacts")
    p.add_argument("dir")
    p.set_defaults(fn=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 1
    except CorpusError as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return 1
    except experiments.ExperimentError as exc:
        print(f"error: experiment: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
