import json
import os
import subprocess
import sys

import numpy as np
import pytest

from genuine import experiments
from genuine.baselines import avg_ent_scores, avg_prob_scores
from genuine.cli import main as cli_main
from genuine.config import (ConfigError, ExperimentConfig, load_experiment_config,
                            load_synth_spec)

SYNTH_SPEC = """
num_records = 80
tokens_min = 5
tokens_max = 8
sentences_min = 1
sentences_max = 2
embedding_dim = 6
seed = 3
"""

FAST_CONFIG = """
synth_spec = {spec}
graph_kind = dpt
variant = full
hidden_dim = 6
clf_hidden = 6
num_layers = 1
keep_ratio = 0.5
lr = 0.02
max_epochs = 4
patience = 4
run_seeds = 101,102
noise_ratios = 0,0.5
train_fractions = 0.5
output_dir = {out}
"""


@pytest.fixture
def spec_file(tmp_path):
    path = tmp_path / "spec.cfg"
    path.write_text(SYNTH_SPEC)
    return path


@pytest.fixture
def config_file(tmp_path, spec_file):
    path = tmp_path / "exp.cfg"
    path.write_text(FAST_CONFIG.format(spec=spec_file, out=tmp_path / "out"))
    return path


class TestConfig:
    def test_load_and_defaults(self, config_file):
        cfg = load_experiment_config(config_file)
        assert cfg.run_seeds == [101, 102]
        assert cfg.noise_ratios == [0.0, 0.5]
        assert cfg.batch_size == 16  # untouched default

    def test_unknown_key_rejected(self, tmp_path, spec_file):
        path = tmp_path / "bad.cfg"
        path.write_text(f"synth_spec = {spec_file}\nnot_a_key = 3\n")
        with pytest.raises(ConfigError, match="unknown key"):
            load_experiment_config(path)

    def test_type_errors_rejected(self, tmp_path, spec_file):
        path = tmp_path / "bad.cfg"
        path.write_text(f"synth_spec = {spec_file}\nmax_epochs = many\n")
        with pytest.raises(ConfigError):
            load_experiment_config(path)

    def test_needs_exactly_one_dataset_source(self, tmp_path):
        path = tmp_path / "none.cfg"
        path.write_text("graph_kind = dpt\n")
        with pytest.raises(ConfigError):
            load_experiment_config(path)

    def test_synth_spec_parsing(self, spec_file):
        spec = load_synth_spec(spec_file)
        assert spec.num_records == 80
        assert spec.embedding_dim == 6

    def test_env_var_overrides_output_dir(self, config_file, monkeypatch):
        monkeypatch.setenv("GENUINE_OUTPUT_DIR", "/elsewhere")
        cfg = load_experiment_config(config_file)
        assert cfg.resolved_output_dir() == "/elsewhere"


class TestBaselineScores:
    def test_avg_prob_reads_aggregate_column(self):
        from genuine.model import GraphInstance
        inst = GraphInstance("a", 1, np.zeros((1, 1)), np.zeros((1, 2)), None,
                             np.arange(8, dtype=float).reshape(1, 8), None)
        assert avg_prob_scores([inst]) == [6.0]

    def test_avg_ent_orientation_and_range(self):
        from genuine.model import GraphInstance
        def inst(avg_ent):
            agg = np.zeros((1, 8))
            agg[0, 2] = avg_ent
            return GraphInstance("x", 1, np.zeros((1, 1)), np.zeros((1, 2)), None,
                                 agg, None)
        scores = avg_ent_scores([inst(0.5), inst(2.0), inst(1.0)])
        assert scores[0] == 1.0 and scores[1] == 0.0  # low entropy -> confident
        assert all(0.0 <= s <= 1.0 for s in scores)

    def test_avg_ent_constant_set(self):
        from genuine.model import GraphInstance
        agg = np.ones((1, 8))
        insts = [GraphInstance(str(i), 1, np.zeros((1, 1)), np.zeros((1, 2)), None,
                               agg.copy(), None) for i in range(3)]
        assert avg_ent_scores(insts) == [0.5, 0.5, 0.5]


class TestExperiments:
    def test_run_experiment_artifacts(self, config_file, tmp_path):
        cfg = load_experiment_config(config_file)
        runs = experiments.run_experiment(cfg)
        # 2 seeds x (model + 3 baselines)
        assert len(runs) == 8
        out = tmp_path / "out"
        assert (out / "results.csv").exists()
        assert (out / "timings.csv").exists()
        assert (out / "summary.txt").exists()
        rows = experiments.parse_results_csv(out / "results.csv")
        assert len(rows) == 8
        variants = {r["variant"] for r in rows}
        assert variants == {"full", "avg_prob", "avg_ent", "sup"}

    def test_results_csv_roundtrip_exact(self, config_file, tmp_path):
        cfg = load_experiment_config(config_file)
        runs = experiments.run_experiment(cfg)
        rows = experiments.parse_results_csv(tmp_path / "out" / "results.csv")
        by_key = {(r["experiment"], r["variant"], r["seed"]): r for r in rows}
        for run in runs:
            row = by_key[(run.experiment, run.variant, run.seed)]
            assert row["auroc"] == run.auroc
            assert row["ece"] == run.ece
            assert row["nll"] == run.nll
            assert row["brier"] == run.brier

    def test_header_only_csv_for_empty_artifacts(self, tmp_path):
        out = tmp_path / "empty"
        (out / "runs").mkdir(parents=True)
        path = experiments.report(out)
        content = path.read_text().strip().splitlines()
        assert content == [",".join(experiments.RESULTS_COLUMNS)]

    def test_determinism_byte_identical(self, tmp_path, spec_file):
        cfg_text = FAST_CONFIG.format(spec=spec_file, out=tmp_path / "a")
        path = tmp_path / "exp.cfg"
        path.write_text(cfg_text)
        cfg = load_experiment_config(path)
        experiments.run_experiment(cfg)
        first = (tmp_path / "a" / "results.csv").read_bytes()
        experiments.run_experiment(cfg, outdir=tmp_path / "b")
        second = (tmp_path / "b" / "results.csv").read_bytes()
        assert first == second

    def test_ablation_pairing_and_variants(self, config_file, tmp_path):
        cfg = load_experiment_config(config_file)
        cfg.run_seeds = [101]
        runs = experiments.run_ablation(cfg)
        assert {r.variant for r in runs} == set(experiments.ABLATION_VARIANTS)
        # paired: every variant saw the same test split per seed
        pred_dir = tmp_path / "out" / "predictions"
        ids = {}
        for variant in experiments.ABLATION_VARIANTS:
            path = pred_dir / f"ablation__{variant}__dpt__seed101.csv"
            ids[variant] = [line.split(",")[0] for line in
                            path.read_text().strip().splitlines()[1:]]
        assert len({tuple(v) for v in ids.values()}) == 1

    def test_robustness_ratio_zero_equals_base(self, tmp_path, spec_file):
        cfg_text = FAST_CONFIG.format(spec=spec_file, out=tmp_path / "base")
        path = tmp_path / "exp.cfg"
        path.write_text(cfg_text)
        cfg = load_experiment_config(path)
        experiments.run_experiment(cfg, outdir=tmp_path / "base")
        experiments.run_robustness(cfg, outdir=tmp_path / "rob")
        base_rows = experiments.parse_results_csv(tmp_path / "base" / "results.csv")
        rob_rows = experiments.parse_results_csv(tmp_path / "rob" / "results.csv")
        base = {(r["variant"], r["seed"]): r for r in base_rows if r["experiment"] == "base"
                and r["variant"] == "full"}
        zero = {(r["variant"], r["seed"]): r for r in rob_rows
                if r["experiment"] == "noise=0"}
        assert set(base) == set(zero)
        for key, row in base.items():
            for metric in ("auroc", "ece", "nll", "brier"):
                assert zero[key][metric] == row[metric]

    def test_robustness_uses_all_cells(self, config_file, tmp_path):
        cfg = load_experiment_config(config_file)
        cfg.run_seeds = [101]
        runs = experiments.run_robustness(cfg)
        labels = {r.experiment for r in runs}
        assert labels == {"noise=0", "noise=0.5", "trainsize=0.5"}

    def test_scaling_rows(self, config_file, tmp_path):
        cfg = load_experiment_config(config_file)
        cfg.scaling_node_counts = [8, 16]
        cfg.scaling_densities = [0.5]
        cfg.scaling_fixed_nodes = 8
        cfg.scaling_graphs = 2
        cfg.scaling_epochs = 1
        rows = experiments.run_scaling(cfg)
        assert len(rows) == 3
        assert all(r["seconds_per_epoch"] > 0 for r in rows)
        assert (tmp_path / "out" / "scaling.csv").exists()


class TestCli:
    def test_synth_ingest_train_eval(self, tmp_path, spec_file):
        out = tmp_path / "data"
        assert cli_main(["synth", "--spec", str(spec_file), "--out", str(out)]) == 0
        records = out / "records.jsonl"
        assert cli_main(["ingest", str(records)]) == 0

        cfg = tmp_path / "train.cfg"
        cfg.write_text(f"""
dataset = {records}
variant = grey_only
hidden_dim = 4
clf_hidden = 4
num_layers = 1
lr = 0.02
max_epochs = 2
patience = 2
run_seeds = 7
output_dir = {tmp_path / 'run'}
""")
        assert cli_main(["train", "--config", str(cfg)]) == 0
        ckpt = tmp_path / "run" / "checkpoint.npz"
        assert ckpt.exists()
        assert cli_main(["eval", "--config", str(cfg), "--checkpoint", str(ckpt)]) == 0

    def test_ingest_rejects_bad_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"id": "x"}\n')
        assert cli_main(["ingest", str(bad)]) == 1

    def test_config_error_exit_code(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("unknown_key = 1\n")
        assert cli_main(["run", "--config", str(cfg)]) == 1

    def test_report_subcommand(self, config_file, tmp_path):
        cfg = load_experiment_config(config_file)
        cfg.run_seeds = [101]
        experiments.run_experiment(cfg)
        results = tmp_path / "out" / "results.csv"
        before = results.read_bytes()
        results.unlink()
        assert cli_main(["report", str(tmp_path / "out")]) == 0
        assert results.read_bytes() == before

    def test_console_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "genuine.cli", "--help"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "ingest" in proc.stdout
