"""Experiment runner: exit codes, CSV schemas, determinism, manifests."""

import csv
import json

import numpy as np
import pytest
import yaml

import risjcas.cli as cli
from risjcas.config import ExperimentConfig, load_config
from risjcas.errors import ConfigError, NumericalAbort

TINY = {
    "mode": "monostatic",
    "model": "pc",
    "ris_side": 2,
    "ris_spacing_wavelengths": 0.25,
    "comm_noise_dbm": -50.0,
    "alpha_grid": [0.0, 0.5, 1.0],
    "outer_iters": 2,
    "inner_cov_iters": 30,
    "seeds": 2,
    "quantization": {
        "noise_grid": [1.0e-4, 1.0e-2],
        "bits": [1, 8],
        "batch_size": 32,
        "batch_seeds": 2,
    },
}


def write_config(tmp_path, overrides=None, name="cfg.yaml"):
    data = dict(TINY)
    if overrides:
        data.update(overrides)
    path = tmp_path / name
    with open(path, "w") as fh:
        yaml.safe_dump(data, fh)
    return path


class TestValidate:
    def test_default_config_ok(self, capsys):
        assert cli.main(["validate"]) == 0
        assert "ok" in capsys.readouterr().out

    def test_nonpositive_spacing_names_field(self, tmp_path, capsys):
        path = write_config(tmp_path, {"ris_spacing_wavelengths": -0.5})
        assert cli.main(["validate", "--config", str(path)]) == 2
        assert "ris_spacing_wavelengths" in capsys.readouterr().err

    def test_alpha_out_of_range(self, tmp_path, capsys):
        path = write_config(tmp_path, {"alpha_grid": [0.0, 1.5]})
        assert cli.main(["validate", "--config", str(path)]) == 2
        assert "alpha_grid" in capsys.readouterr().err

    def test_unknown_field_rejected(self, tmp_path):
        path = write_config(tmp_path, {"frobnicate": 1})
        assert cli.main(["validate", "--config", str(path)]) == 2

    def test_degrees_convert_at_parse(self, tmp_path):
        path = write_config(tmp_path, {"target_angle_deg": 30.0})
        config = load_config(path)
        assert np.isclose(config.scene().angle_bs, np.pi / 6)


class TestSweep:
    def test_outputs_and_row_counts(self, tmp_path):
        path = write_config(tmp_path)
        out = tmp_path / "run"
        assert cli.main(["sweep", "--config", str(path), "--out", str(out)]) == 0
        with open(out / "pareto.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2 * 3  # seeds x alpha grid
        assert set(rows[0]) == {"alpha", "fi_trace", "mi", "model", "mode", "M",
                                "spacing", "seed"}
        assert (out / "trace.csv").exists() and (out / "manifest.json").exists()

    def test_identical_bytes_on_rerun(self, tmp_path):
        path = write_config(tmp_path)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        cli.main(["sweep", "--config", str(path), "--out", str(out1)])
        cli.main(["sweep", "--config", str(path), "--out", str(out2)])
        assert (out1 / "pareto.csv").read_bytes() == (out2 / "pareto.csv").read_bytes()
        assert (out1 / "trace.csv").read_bytes() == (out2 / "trace.csv").read_bytes()

    def test_threaded_matches_serial(self, tmp_path):
        path = write_config(tmp_path)
        out1, out2 = tmp_path / "serial", tmp_path / "threaded"
        cli.main(["sweep", "--config", str(path), "--out", str(out1)])
        cli.main(["sweep", "--config", str(path), "--out", str(out2),
                  "--threads", "2"])
        assert (out1 / "pareto.csv").read_bytes() == (out2 / "pareto.csv").read_bytes()

    def test_csv_roundtrips_full_precision(self, tmp_path):
        path = write_config(tmp_path)
        out = tmp_path / "run"
        cli.main(["sweep", "--config", str(path), "--out", str(out)])
        with open(out / "pareto.csv") as fh:
            rows = list(csv.DictReader(fh))
        for row in rows:
            val = float(row["fi_trace"])
            assert cli._fmt(val) == row["fi_trace"]

    def test_manifest_hash_tracks_config(self, tmp_path):
        p1 = write_config(tmp_path, name="c1.yaml")
        p2 = write_config(tmp_path, {"power_dbm": 29.0}, name="c2.yaml")
        out1, out2, out3 = tmp_path / "r1", tmp_path / "r2", tmp_path / "r3"
        cli.main(["sweep", "--config", str(p1), "--out", str(out1)])
        cli.main(["sweep", "--config", str(p1), "--out", str(out2)])
        cli.main(["sweep", "--config", str(p2), "--out", str(out3)])
        h = [json.load(open(o / "manifest.json"))["content_hash"]
             for o in (out1, out2, out3)]
        assert h[0] == h[1] and h[0] != h[2]

    def test_numerical_abort_exit_code(self, tmp_path, monkeypatch):
        def boom(*args, **kwargs):
            raise NumericalAbort("forced", {"why": "test"})

        monkeypatch.setattr(cli, "alternating_optimize", boom)
        path = write_config(tmp_path)
        out = tmp_path / "run"
        assert cli.main(["sweep", "--config", str(path), "--out", str(out)]) == 3
        diag = json.load(open(out / "abort_diagnostics.json"))
        assert diag["diagnostics"] == {"why": "test"}


class TestBistaticAod:
    def test_aod_recorded_and_changes_fi(self, tmp_path):
        base = {"mode": "bistatic", "aod_deg": 120.0}
        p1 = write_config(tmp_path, base, name="aod120.yaml")
        p2 = write_config(tmp_path, {**base, "aod_deg": 108.0}, name="aod108.yaml")
        out1, out2 = tmp_path / "r120", tmp_path / "r108"
        assert cli.main(["sweep", "--config", str(p1), "--out", str(out1)]) == 0
        assert cli.main(["sweep", "--config", str(p2), "--out", str(out2)]) == 0
        m1 = json.load(open(out1 / "manifest.json"))
        m2 = json.load(open(out2 / "manifest.json"))
        assert m1["config"]["aod_deg"] == 120.0
        assert m2["config"]["aod_deg"] == 108.0
        with open(out1 / "pareto.csv") as fh:
            fi1 = [float(r["fi_trace"]) for r in csv.DictReader(fh)]
        with open(out2 / "pareto.csv") as fh:
            fi2 = [float(r["fi_trace"]) for r in csv.DictReader(fh)]
        assert fi1 != fi2


class TestQuantStudy:
    def test_rows_per_noise_point(self, tmp_path):
        path = write_config(tmp_path)
        out = tmp_path / "run"
        assert cli.main(["quant-study", "--config", str(path), "--out", str(out)]) == 0
        with open(out / "quantization.csv") as fh:
            rows = list(csv.DictReader(fh))
        # bits x si on/off per noise point
        assert len(rows) == 2 * 2 * 2
        by_noise = {}
        for row in rows:
            by_noise.setdefault(row["noise_var"], []).append(row)
        assert all(len(v) == 4 for v in by_noise.values())

    def test_empty_bits_is_usage_error(self, tmp_path):
        path = write_config(tmp_path, {"quantization": {"bits": []}})
        assert cli.main(["quant-study", "--config", str(path),
                         "--out", str(tmp_path / "x")]) == 2

    def test_fi_monotone_in_bits_from_csv(self, tmp_path):
        path = write_config(tmp_path, {"quantization": {
            "noise_grid": [1.0e-4, 1.0e-2], "bits": [1, 3, 8],
            "batch_size": 64, "batch_seeds": 1}})
        out = tmp_path / "run"
        cli.main(["quant-study", "--config", str(path), "--out", str(out)])
        with open(out / "quantization.csv") as fh:
            rows = list(csv.DictReader(fh))
        series = {}
        for row in rows:
            key = (row["noise_var"], row["si_flag"])
            series.setdefault(key, []).append(
                (int(row["bits"]), float(row["fi_trace_mean"])))
        for values in series.values():
            values.sort()
            fis = [v for _, v in values]
            assert fis == sorted(fis)


class TestConfigRoundtrip:
    def test_yaml_roundtrip_lossless(self, tmp_path):
        config = ExperimentConfig(power_dbm=29.123456789012345,
                                  alpha_grid=[0.0, 1.0, ])
        from risjcas.config import save_config
        path = tmp_path / "echo.yaml"
        save_config(path, config)
        again = load_config(path)
        assert again == config

    def test_model_aliases(self, tmp_path):
        path = write_config(tmp_path, {"model": "conv", "mode": "mono"})
        config = load_config(path)
        assert config.model == "conventional" and config.mode == "monostatic"
