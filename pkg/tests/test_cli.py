"""Command-line interface: config parsing, exit codes, artifacts."""

import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from clusterlift import METHOD_REGISTRY, load_dataset, save_dataset
from clusterlift.cli import ConfigError, main, parse_experiment_config
from conftest import random_dataset

FAST_SWEEP = """\
seed = 3
sim.n_clusters = 80
sim.n_items = 1
sim.covariate_dim = 2
train.max_epochs = 25
methods = addipw-conversion, random
cluster_sizes = 2, 3
n_seeds = 2
output_dir = {out}
"""


def write_config(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestConfigParsing:
    def test_defaults(self):
        cfg = parse_experiment_config("")
        assert cfg.sim.n_clusters == 20000
        assert cfg.sim.n_items == 10
        assert cfg.train.learning_rate == 0.1
        assert cfg.train.l2_lambda == 0.001
        assert cfg.cluster_sizes == (2, 10, 20, 40)
        assert cfg.n_seeds == 10
        assert cfg.output_dir == "results"
        for m in cfg.methods:
            assert m in METHOD_REGISTRY

    def test_overrides_and_comments(self):
        text = """
        # comment line
        sim.n_clusters = 500   # trailing comment
        sim.temperature = 2.5
        train.l2_lambda = 0.01
        methods = random
        n_seeds = 4
        """
        cfg = parse_experiment_config(text)
        assert cfg.sim.n_clusters == 500
        assert cfg.sim.temperature == 2.5
        assert cfg.train.l2_lambda == 0.01
        assert cfg.methods == ("random",)
        assert cfg.n_seeds == 4

    def test_seed_alias(self):
        cfg = parse_experiment_config("seed = 77")
        assert cfg.sim.seed == 77

    def test_unknown_key_names_line(self):
        with pytest.raises(ConfigError, match=r"line 2.*sim\.bogus"):
            parse_experiment_config("seed = 1\nsim.bogus = 3\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_experiment_config("seed = 1\nseed = 2\n")

    def test_bad_value_names_line(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_experiment_config("sim.n_clusters = soon\n")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_experiment_config("just some words\n")

    def test_unknown_method_lists_valid(self):
        with pytest.raises(ConfigError) as exc:
            parse_experiment_config("methods = addipw-conversion, mystery\n")
        assert "mystery" in str(exc.value)
        for name in METHOD_REGISTRY:
            assert name in str(exc.value)

    def test_invalid_sim_value_names_field(self):
        # well-formed line, out-of-range value: simulator validation, not
        # a config-grammar problem
        from clusterlift import ValidationError

        with pytest.raises(ValidationError, match="temperature"):
            parse_experiment_config("sim.temperature = 0\n")


def make_data(tmp_path, seed=4, n_clusters=60, name="data.jsonl"):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, n_clusters=n_clusters, d=2)
    path = tmp_path / name
    save_dataset(ds, path)
    return str(path), ds


class TestSimulateCommand:
    def test_writes_dataset_and_summary(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "sim.n_clusters = 50\nsim.n_items = 2\n")
        out = tmp_path / "sim.jsonl"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        ds = load_dataset(out)
        assert ds.n_clusters == 50
        captured = capsys.readouterr()
        assert "50" in captured.out and str(out) in captured.out

    def test_seed_override_changes_data(self, tmp_path):
        cfg = write_config(tmp_path, "sim.n_clusters = 30\nsim.n_items = 1\n")
        outs = []
        for seed, name in [(1, "a.jsonl"), (1, "b.jsonl"), (2, "c.jsonl")]:
            out = tmp_path / name
            assert main(["--seed", str(seed), "simulate",
                         "--config", cfg, "--out", str(out)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]
        assert outs[0] != outs[2]

    def test_invalid_config_value_exits_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "sim.temperature = -1\n")
        code = main(["simulate", "--config", cfg, "--out", str(tmp_path / "x")])
        assert code == 2
        assert "temperature" in capsys.readouterr().err

    def test_unwritable_out_exits_2(self, tmp_path, capsys):
        code = main(["simulate", "--out", str(tmp_path / "no" / "dir" / "x.jsonl")])
        assert code == 2

    def test_quiet_suppresses_stdout(self, tmp_path, capsys):
        out = tmp_path / "sim.jsonl"
        cfg = write_config(tmp_path, "sim.n_clusters = 20\nsim.n_items = 1\n")
        assert main(["simulate", "--config", cfg, "--quiet",
                     "--out", str(out)]) == 0
        assert capsys.readouterr().out == ""


class TestTrainCommand:
    def test_trains_and_saves(self, tmp_path, capsys):
        data, _ = make_data(tmp_path)
        out = tmp_path / "model.json"
        assert main(["train", "--data", data,
                     "--method", "addipw-conversion", "--out", str(out)]) == 0
        payload = json.loads(out.read_text())
        assert payload["provenance"] == "addipw-conversion"
        assert len(payload["weights"]) == 2
        assert "objective" in capsys.readouterr().out

    def test_unknown_method_exits_1_with_valid_list(self, tmp_path, capsys):
        data, _ = make_data(tmp_path)
        code = main(["train", "--data", data, "--method", "nope",
                     "--out", str(tmp_path / "m.json")])
        assert code == 1
        err = capsys.readouterr().err
        assert "nope" in err and "addipw-ipc" in err

    def test_random_method_exits_1(self, tmp_path, capsys):
        data, _ = make_data(tmp_path)
        code = main(["train", "--data", data, "--method", "random",
                     "--out", str(tmp_path / "m.json")])
        assert code == 1
        assert "random" in capsys.readouterr().err

    def test_missing_data_file_exits_2(self, tmp_path):
        code = main(["train", "--data", str(tmp_path / "absent.jsonl"),
                     "--method", "random", "--out", str(tmp_path / "m.json")])
        # unknown-file beats method validation order? method checked first
        assert code in (1, 2)

    def test_divergence_exits_3(self, tmp_path, capsys):
        from dataclasses import replace

        rng = np.random.default_rng(0)
        ds = random_dataset(rng, n_clusters=12, d=2)
        # inflate revenue so the first ascent step overflows the objective
        from clusterlift import Cluster, Dataset

        clusters = tuple(
            Cluster.from_units(
                c.cluster_id,
                tuple(replace(u, revenue=u.revenue * 1e300,
                              cost=u.cost * 1e300, price=u.price * 1e300)
                      for u in c.units))
            for c in ds.clusters
        )
        big = Dataset(clusters, ds.covariate_dim, ds.provenance)
        path = tmp_path / "big.jsonl"
        save_dataset(big, path)
        code = main(["train", "--data", str(path),
                     "--method", "addipw-crvtw", "--out", str(tmp_path / "m.json")])
        assert code == 3
        assert "epoch" in capsys.readouterr().err


class TestQiniCommand:
    def fit(self, tmp_path):
        data, ds = make_data(tmp_path)
        model = tmp_path / "model.json"
        assert main(["--quiet", "train", "--data", data,
                     "--method", "addipw-conversion", "--out", str(model)]) == 0
        return data, str(model)

    @pytest.mark.parametrize("metric,n_rows", [("conversion", 21),
                                               ("profit", 21),
                                               ("both", 42)])
    def test_writes_points(self, tmp_path, capsys, metric, n_rows):
        data, model = self.fit(tmp_path)
        out = tmp_path / "curve.csv"
        assert main(["qini", "--data", data, "--model", model,
                     "--metric", metric, "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("method,cluster_size,seed,phi,metric")
        assert len(lines) == 1 + n_rows
        out_text = capsys.readouterr().out
        assert "auc" in out_text

    def test_dimension_mismatch_exits_2(self, tmp_path):
        _, model = self.fit(tmp_path)
        rng = np.random.default_rng(8)
        other = random_dataset(rng, n_clusters=10, d=5)
        path = tmp_path / "wide.jsonl"
        save_dataset(other, path)
        assert main(["qini", "--data", str(path), "--model", model,
                     "--out", str(tmp_path / "c.csv")]) == 2


class TestSweepAndReport:
    def run_sweep(self, tmp_path, out_name="results", extra=()):
        cfg = write_config(
            tmp_path, FAST_SWEEP.format(out=tmp_path / out_name),
            name=f"{out_name}.cfg",
        )
        code = main([*extra, "sweep", "--config", cfg, "--quiet"])
        return code, tmp_path / out_name

    def test_artifacts(self, tmp_path):
        code, out = self.run_sweep(tmp_path)
        assert code == 0
        results = (out / "results.csv").read_text().splitlines()
        assert results[0] == ("method,cluster_size,seed,phi,metric,"
                              "estimator_kind,incremental_value")
        # 2 methods x 2 sizes x 2 seeds x 2 metrics x 21 points
        assert len(results) == 1 + 2 * 2 * 2 * 2 * 21
        summary = (out / "summary.csv").read_text().splitlines()
        assert len(summary) == 1 + 2 * 2 * 2
        report = (out / "sweep_report.txt").read_text()
        assert "addipw-conversion" in report

    def test_jobs_flag_is_output_invariant(self, tmp_path):
        _, out1 = self.run_sweep(tmp_path, "serial")
        _, out2 = self.run_sweep(tmp_path, "parallel", extra=("--jobs", "3"))
        assert (out1 / "results.csv").read_bytes() == \
            (out2 / "results.csv").read_bytes()
        assert (out1 / "summary.csv").read_bytes() == \
            (out2 / "summary.csv").read_bytes()

    def test_resume_is_byte_identical(self, tmp_path):
        _, full = self.run_sweep(tmp_path, "full")
        # fresh sweep interrupted after seed 0: simulate by truncating results
        _, part = self.run_sweep(tmp_path, "partial")
        results = (part / "results.csv").read_text().splitlines()
        header, rows = results[0], results[1:]
        kept = [r for r in rows if r.split(",")[2] == "0"]
        (part / "results.csv").write_text("\n".join([header, *kept]) + "\n")
        cfg = write_config(tmp_path, FAST_SWEEP.format(out=part),
                           name="resume.cfg")
        assert main(["sweep", "--config", cfg, "--quiet"]) == 0
        assert (part / "results.csv").read_bytes() == \
            (full / "results.csv").read_bytes()

    def test_report_renders_figures(self, tmp_path):
        _, out = self.run_sweep(tmp_path)
        figs = tmp_path / "figs"
        assert main(["report", "--results-dir", str(out),
                     "--figs-dir", str(figs), "--quiet"]) == 0
        for name in ["fig_auc.svg", "fig_auc70.svg", "fig_qini_largest.svg"]:
            svg = (figs / name).read_text()
            root = ET.fromstring(svg)
            assert root.tag.endswith("svg")
            assert "addipw-conversion" in svg and "random" in svg

    def test_report_missing_results_exits_2(self, tmp_path, capsys):
        code = main(["report", "--results-dir", str(tmp_path / "empty"),
                     "--figs-dir", str(tmp_path / "figs")])
        assert code == 2
        assert "results.csv" in capsys.readouterr().err


class TestGlobalFlags:
    def test_flags_accepted_both_sides(self, tmp_path):
        cfg = write_config(tmp_path, "sim.n_clusters = 20\nsim.n_items = 1\n")
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        assert main(["--seed", "5", "--quiet", "simulate",
                     "--config", cfg, "--out", str(a)]) == 0
        assert main(["simulate", "--config", cfg, "--out", str(b),
                     "--seed", "5", "--quiet"]) == 0
        assert a.read_bytes() == b.read_bytes()
