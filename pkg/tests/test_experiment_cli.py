"""Experiment pipeline, config files and the command-line interface."""

import json
import subprocess
import sys

import numpy as np
import pytest

from costsense.cli import main
from costsense.errors import ConfigError
from costsense.experiment import (
    ExperimentConfig,
    build_dataset,
    build_splits,
    config_to_text,
    derive_seeds,
    load_config,
    resolve_retention,
    run_experiment,
)


def tiny_overrides(**extra):
    """A seconds-scale run: 3 classes, 40 points each, 3 epochs."""
    base = {
        "data.n_classes": "3",
        "data.samples_per_class": "40",
        "protocol.train_fraction": "0.5",
        "protocol.val_fraction": "0.2",
        "protocol.retention": "2:0.3",
        "network.hidden": "8",
        "train.epochs": "3",
        "train.batch_size": "8",
        "train.mode": "baseline",
    }
    base.update(extra)
    return base


def tiny_config(seed=3, **extra):
    cfg = load_config(None, tiny_overrides(**extra))
    cfg.seed = seed
    return cfg


class TestLoadConfig:
    def test_defaults(self):
        cfg = load_config()
        assert cfg.source == "gaussian"
        assert cfg.n_classes == 5
        assert cfg.dim == 2
        assert cfg.samples_per_class == (300,)
        assert cfg.radius == 3.0
        assert cfg.train_fraction == pytest.approx(1.0 / 3.0)
        assert cfg.val_fraction == 0.05
        assert cfg.retention == {}
        assert cfg.hidden == (32,)
        assert cfg.loss == "ce"
        assert cfg.learning_rate == 0.1
        assert cfg.batch_size == 16
        assert cfg.epochs == 60
        assert cfg.mode == "cosen"
        assert cfg.gamma_xi == 0.3
        assert cfg.mu1 is None and cfg.sigma1 is None
        assert cfg.mu2 is None and cfg.sigma2 is None
        assert cfg.separability_every == 10
        assert cfg.seed is None
        assert cfg.label == ""

    def test_file_values_are_parsed(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text(
            "[data]\n"
            "n_classes = 4\n"
            "samples_per_class = 10,20,30,40\n"
            "[protocol]\n"
            "retention = 2:0.1, odd:0.5\n"
            "[costs]\n"
            "mu1 = auto\n"
            "sigma1 = 2.5\n"
            "[train]\n"
            "epochs = 7\n"
        )
        cfg = load_config(path)
        assert cfg.n_classes == 4
        assert cfg.samples_per_class == (10, 20, 30, 40)
        assert cfg.retention == {"2": 0.1, "odd": 0.5}
        assert cfg.mu1 is None
        assert cfg.sigma1 == 2.5
        assert cfg.epochs == 7

    def test_overrides_beat_the_file(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[train]\nepochs = 7\n")
        cfg = load_config(path, {"train.epochs": "11"})
        assert cfg.epochs == 11

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config key"):
            load_config(None, {"data.nope": "1"})

    def test_override_without_section_rejected(self):
        with pytest.raises(ConfigError, match="section.key"):
            load_config(None, {"epochs": "11"})

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.ini")

    def test_bad_mode_rejected(self):
        with pytest.raises(ConfigError, match="unknown mode"):
            load_config(None, {"train.mode": "psychic"})

    def test_bad_loss_rejected(self):
        with pytest.raises(ConfigError, match="unknown loss"):
            load_config(None, {"train.loss": "l0"})

    def test_fixed_cost_mode_needs_a_source(self):
        with pytest.raises(ConfigError, match="fixed_cost"):
            load_config(None, {"train.mode": "fixed-cost"})

    def test_auto_tokens_mean_unset(self):
        cfg = load_config(None, {"costs.mu1": "auto", "costs.sigma2": "none",
                                 "costs.mu2": "0.75"})
        assert cfg.mu1 is None
        assert cfg.sigma2 is None
        assert cfg.mu2 == 0.75

    def test_bad_numbers_rejected(self):
        with pytest.raises(ConfigError, match="integer"):
            load_config(None, {"train.epochs": "many"})
        with pytest.raises(ConfigError, match="number"):
            load_config(None, {"data.radius": "wide"})
        with pytest.raises(ConfigError, match="retention"):
            load_config(None, {"protocol.retention": "2=0.1"})

    def test_config_text_round_trips(self, tmp_path):
        cfg = tiny_config(seed=5, **{
            "costs.sigma1": "5.0",
            "costs.mu2": "1.0",
            "train.mode": "fixed-cost",
            "train.fixed_cost": "h",
            "sampling.rus_target": "10",
            "output.label": "demo",
        })
        path = tmp_path / "archived.ini"
        path.write_text(config_to_text(cfg))
        assert load_config(path) == cfg


class TestResolveRetention:
    def test_integer_keys(self):
        assert resolve_retention({"2": 0.1}, 5) == {2: 0.1}

    def test_odd_and_even_tokens(self):
        assert resolve_retention({"odd": 0.1}, 5) == {1: 0.1, 3: 0.1}
        assert resolve_retention({"even": 0.2}, 5) == {0: 0.2, 2: 0.2, 4: 0.2}

    def test_specific_class_can_refine_a_token(self):
        got = resolve_retention({"odd": 0.1, "3": 0.5}, 6)
        assert got == {1: 0.1, 3: 0.5, 5: 0.1}

    def test_non_index_key_rejected(self):
        with pytest.raises(ConfigError, match="odd"):
            resolve_retention({"minority": 0.1}, 5)

    def test_out_of_range_rejected(self):
        with pytest.raises(ConfigError, match="out of range"):
            resolve_retention({"7": 0.1}, 5)


class TestDeriveSeeds:
    def test_components_are_named_and_deterministic(self):
        seeds = derive_seeds(42)
        assert set(seeds) == {"data", "protocol", "init", "train", "sampling"}
        assert seeds == derive_seeds(42)

    def test_components_differ_from_each_other(self):
        assert len(set(derive_seeds(0).values())) == 5

    def test_different_run_seeds_differ(self):
        assert derive_seeds(0) != derive_seeds(1)


class TestBuildDataset:
    def test_single_count_broadcasts_over_classes(self):
        cfg = tiny_config()
        ds = build_dataset(cfg, data_seed=0)
        assert list(ds.class_histogram) == [40, 40, 40]

    def test_idx_source_needs_paths(self):
        cfg = tiny_config(**{"data.source": "idx"})
        with pytest.raises(ConfigError, match="images and labels"):
            build_dataset(cfg, 0)

    def test_csv_source_needs_a_path(self):
        cfg = tiny_config(**{"data.source": "csv"})
        with pytest.raises(ConfigError, match="csv_path"):
            build_dataset(cfg, 0)

    def test_splits_respect_the_retention(self):
        train, val, test = build_splits(tiny_config(), derive_seeds(3))
        # 40 per class, train_fraction 0.5 -> pool 20; class 2 keeps 30%
        assert list(test.class_histogram) == [20, 20, 20]
        kept = train.class_histogram + val.class_histogram
        assert list(kept) == [20, 20, 6]


class TestRunExperiment:
    def test_baseline_run_shape(self):
        report, history, costs = run_experiment(tiny_config(), write=False)
        assert report.n_test == 60
        assert 0.0 <= report.average_class_accuracy <= 1.0
        assert len(history) == 3
        assert [rec.epoch for rec in history] == [1, 2, 3]
        assert np.all(costs == 1.0)

    def test_history_records_carry_the_curve_fields(self):
        _, history, _ = run_experiment(tiny_config(), write=False)
        for rec in history:
            assert np.isfinite(rec.train_loss)
            assert 0.0 <= rec.val_error <= 1.0
            assert rec.seconds >= 0.0

    def test_seed_is_required(self):
        cfg = load_config(None, tiny_overrides())
        with pytest.raises(ConfigError, match="seed"):
            run_experiment(cfg, write=False)

    @pytest.mark.parametrize("mode,fixed", [
        ("baseline", ""), ("cosen", ""), ("smote", ""), ("rus", ""),
        ("fixed-cost", "h"), ("fixed-cost", "s"), ("fixed-cost", "m"),
    ])
    def test_every_mode_runs(self, mode, fixed):
        cfg = tiny_config(**{"train.mode": mode, "train.fixed_cost": fixed})
        report, history, costs = run_experiment(cfg, write=False)
        assert len(history) == cfg.epochs
        assert costs.shape == (3, 3)
        assert np.all(costs > 0.0) and np.all(costs <= 1.0)
        assert report.confusion.counts.sum() == report.n_test

    def test_cosen_costs_leave_the_all_ones_start(self):
        cfg = tiny_config(**{"train.mode": "cosen", "costs.gamma_xi": "1.0"})
        _, _, costs = run_experiment(cfg, write=False)
        assert costs.min() < 1.0

    def test_artifacts_written_and_config_archived(self, tmp_path):
        cfg = tiny_config(**{"output.dir": str(tmp_path / "run")})
        run_experiment(cfg)
        out = tmp_path / "run"
        for name in ("report.txt", "metrics.csv", "confusion.csv",
                     "history.jsonl", "checkpoint.json", "config.ini"):
            assert (out / name).exists(), name
        assert len((out / "history.jsonl").read_text().splitlines()) == 3
        assert load_config(out / "config.ini") == cfg

    def test_baseline_equals_cosen_with_zero_cost_step(self, tmp_path):
        # same seed, gamma_xi = 0: the cost path degenerates to the baseline
        base = tiny_config(**{"output.dir": str(tmp_path / "a")})
        degen = tiny_config(**{"train.mode": "cosen", "costs.gamma_xi": "0.0",
                               "output.dir": str(tmp_path / "b")})
        run_experiment(base)
        run_experiment(degen)
        for name in ("report.txt", "metrics.csv", "confusion.csv",
                     "checkpoint.json"):
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes(), name

    def test_repeat_runs_are_byte_identical(self, tmp_path):
        # the archived config.ini differs only in the output dir itself
        for sub in ("a", "b"):
            cfg = tiny_config(**{"train.mode": "cosen",
                                 "output.dir": str(tmp_path / sub)})
            run_experiment(cfg)
        for name in ("report.txt", "metrics.csv", "confusion.csv",
                     "checkpoint.json"):
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes(), name


class TestCli:
    def run_cli(self, *argv):
        return main(list(argv))

    def flags(self, **extra):
        out = []
        for key, value in tiny_overrides(**extra).items():
            out.extend([f"--{key}", value])
        return out

    def test_train_writes_artifacts_and_prints_the_report(self, tmp_path, capsys):
        rc = self.run_cli("train", "--seed", "3",
                          "--out", str(tmp_path / "run"), *self.flags())
        out = capsys.readouterr().out
        assert rc == 0
        assert "average_class_accuracy:" in out
        assert f"artifacts: {tmp_path / 'run'}" in out
        assert (tmp_path / "run" / "checkpoint.json").exists()

    def test_evaluate_reproduces_the_training_report(self, tmp_path, capsys):
        self.run_cli("train", "--seed", "3", "--out", str(tmp_path / "run"),
                     *self.flags())
        train_out = capsys.readouterr().out
        rc = self.run_cli("evaluate",
                          "--checkpoint", str(tmp_path / "run" / "checkpoint.json"),
                          "--seed", "3", *self.flags())
        eval_out = capsys.readouterr().out
        assert rc == 0
        for line in train_out.splitlines():
            if "accuracy" in line:
                assert line in eval_out

    def test_protocol_prints_the_split_table(self, capsys):
        rc = self.run_cli("protocol", "--seed", "3", *self.flags())
        out = capsys.readouterr().out
        assert rc == 0
        lines = out.splitlines()
        assert lines[0].split() == ["class", "train", "val", "test"]
        assert lines[-1].startswith("test_fingerprint: ")
        # class 2 keeps 30% of its pool of 20
        totals = [int(v) for v in lines[3].split()[1:]]
        assert totals[0] + totals[1] == 6
        assert totals[2] == 20

    def test_compare_ranks_runs_and_falls_back_to_directory_names(
            self, tmp_path, capsys):
        for sub, mode in (("plain", "baseline"), ("costs", "cosen")):
            self.run_cli("train", "--seed", "3", "--out", str(tmp_path / sub),
                         *self.flags(**{"train.mode": mode}))
        capsys.readouterr()
        rc = self.run_cli("compare", str(tmp_path / "plain"),
                          str(tmp_path / "costs"))
        out = capsys.readouterr().out
        assert rc == 0
        assert "plain" in out and "costs" in out

    def test_compare_refuses_mismatched_test_sets(self, tmp_path, capsys):
        for sub, seed in (("a", "3"), ("b", "4")):
            self.run_cli("train", "--seed", seed, "--out", str(tmp_path / sub),
                         *self.flags())
        capsys.readouterr()
        rc = self.run_cli("compare", str(tmp_path / "a"), str(tmp_path / "b"))
        err = capsys.readouterr().err
        assert rc == 1
        assert json.loads(err)["error"] == "ConfigError"

    def test_gradcheck_reports_every_loss(self, capsys):
        rc = self.run_cli("gradcheck", "--trials", "3", "--network-configs", "1")
        out = capsys.readouterr().out
        assert rc == 0
        for token in ("mse", "hinge", "ce", "coordinates"):
            assert token in out
        assert "FAIL" not in out

    def test_gradcheck_rejects_overrides(self, capsys):
        rc = self.run_cli("gradcheck", "--train.epochs", "2")
        assert rc == 1
        assert json.loads(capsys.readouterr().err)["error"] == "ConfigError"

    def test_unknown_config_key_is_a_json_error(self, capsys):
        rc = self.run_cli("train", "--seed", "1", "--data.nope", "1")
        err = capsys.readouterr().err
        assert rc == 1
        record = json.loads(err)
        assert record["error"] == "ConfigError"
        assert "nope" in record["message"]

    def test_dangling_override_is_a_json_error(self, capsys):
        rc = self.run_cli("train", "--seed", "1", "--train.epochs")
        assert rc == 1
        assert "missing a value" in json.loads(capsys.readouterr().err)["message"]


class TestCliSubprocess:
    """The installed entry point, exercised end to end."""

    def test_module_invocation_works(self):
        proc = subprocess.run(
            [sys.executable, "-m", "costsense", "gradcheck",
             "--trials", "2", "--network-configs", "1"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert "coordinates" in proc.stdout

    def test_train_requires_a_seed(self):
        proc = subprocess.run(
            [sys.executable, "-m", "costsense", "train"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 2
        assert "--seed" in proc.stderr

    def test_failures_emit_one_json_line_on_stderr(self):
        proc = subprocess.run(
            [sys.executable, "-m", "costsense", "train", "--seed", "1",
             "--data.source", "teapots"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 1
        lines = [l for l in proc.stderr.splitlines() if l.strip()]
        assert len(lines) == 1
        assert json.loads(lines[0])["error"] == "ConfigError"
