import json

import numpy as np
import pytest

from css_snn.cli import EXIT_FAIL, EXIT_IO, EXIT_OK, EXIT_USAGE, main
from css_snn.conversion import CalibrationResult
from css_snn.files import (
    fixture_path,
    load_calibration,
    load_dataset,
    load_network,
    save_calibration,
    save_dataset,
    save_network,
)
from css_snn.network import Layer, NetworkSpec

MLP = str(fixture_path("mlp.json"))
MLP_CAL = str(fixture_path("mlp_calib.json"))
MLP_TEST = str(fixture_path("mlp_test.json"))


@pytest.fixture(scope="module")
def calib_file(tmp_path_factory):
    out = tmp_path_factory.mktemp("cal") / "calib.json"
    assert main(["calibrate", "--network", MLP, "--dataset", MLP_CAL, "--out", str(out)]) == EXIT_OK
    return out


def read_rows(path):
    return [line for line in path.read_text().splitlines() if not line.startswith("#")]


class TestCalibrate:
    def test_two_thresholds(self, calib_file):
        assert sorted(load_calibration(calib_file).thresholds) == [1, 3]

    def test_missing_dataset(self, tmp_path, capsys):
        code = main(["calibrate", "--network", MLP, "--dataset", str(tmp_path / "nope.json"), "--out", str(tmp_path / "c.json")])
        assert code == EXIT_USAGE and "nope.json" in capsys.readouterr().err

    def test_percentile_100_is_max(self, tmp_path):
        out = tmp_path / "c.json"
        args = ["calibrate", "--network", MLP, "--dataset", MLP_CAL, "--percentile", "100", "--batches", "1", "--out", str(out)]
        assert main(args) == EXIT_OK
        x, _ = load_dataset(MLP_CAL)
        _, pre = load_network(MLP).forward(x, record=True)
        for i, v in load_calibration(out).thresholds.items():
            assert v == pytest.approx(np.maximum(pre[i], 0).max(), rel=1e-12)

    def test_fixture_shorthand(self, tmp_path):
        out = tmp_path / "c.json"
        assert main(["calibrate", "--network", "fixture:mlp.json", "--dataset", "fixture:mlp_calib.json", "--out", str(out)]) == EXIT_OK

    def test_malformed_network(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{}")
        assert main(["calibrate", "--network", str(bad), "--dataset", MLP_CAL, "--out", str(tmp_path / "c.json")]) == EXIT_IO


class TestConvertRun:
    def test_convert_then_run(self, tmp_path, calib_file):
        model = tmp_path / "m.json"
        assert main(["convert", "--network", MLP, "--calibration", str(calib_file), "--out", str(model)]) == EXIT_OK
        assert main(["run", "--model", str(model), "--dataset", MLP_TEST, "--out-dir", str(tmp_path / "r")]) == EXIT_OK
        summary = json.loads((tmp_path / "r" / "summary.json").read_text())["rows"][0]
        assert summary["agreement"] >= 0.99
        assert abs(summary["accuracy"] - summary["ann_accuracy"]) <= 0.01
        assert summary["total_pj"] == pytest.approx(summary["ac_count"] * 0.9 + summary["mac_count"] * 4.6)

    def test_model_values_kept(self, tmp_path, calib_file):
        model = tmp_path / "m.json"
        main(["convert", "--network", MLP, "--calibration", str(calib_file), "--T", "5", "--P", "0", "--out", str(model)])
        main(["run", "--model", str(model), "--dataset", MLP_TEST, "--out-dir", str(tmp_path / "r")])
        steps = {row.split(",")[1] for row in read_rows(tmp_path / "r" / "trace.csv")[1:]}
        assert steps == {"0", "1", "2", "3", "4", "all"}

    def test_minimal_horizon(self, tmp_path, calib_file):
        args = ["run", "--network", MLP, "--calibration", str(calib_file), "--dataset", MLP_TEST, "--T", "1", "--P", "0"]
        assert main(args + ["--out-dir", str(tmp_path)]) == EXIT_OK
        rows = read_rows(tmp_path / "predictions.csv")
        assert rows[0].startswith("sample,label,pred,ann_pred,logit_0") and len(rows) == 801

    def test_byte_identical(self, tmp_path, calib_file):
        args = ["run", "--network", MLP, "--calibration", str(calib_file), "--dataset", MLP_TEST, "--seed", "3"]
        out = tmp_path / "r"
        main(args + ["--out-dir", str(out)])
        first = {p.name: p.read_bytes() for p in out.iterdir()}
        main(args + ["--out-dir", str(out)])
        assert first == {p.name: p.read_bytes() for p in out.iterdir()}

    def test_model_source_required(self, tmp_path):
        assert main(["run", "--dataset", MLP_TEST, "--out-dir", str(tmp_path)]) == EXIT_USAGE

    def test_bad_precharge(self, tmp_path, calib_file):
        args = ["run", "--network", MLP, "--calibration", str(calib_file), "--dataset", MLP_TEST, "--T", "2", "--P", "2"]
        assert main(args + ["--out-dir", str(tmp_path)]) == EXIT_USAGE


class TestValidate:
    def test_exit_code_matches_verdict(self, tmp_path, capsys):
        out = tmp_path / "v.csv"
        code = main(["validate", "--trials", "2000", "--mc-trials", "5000", "--out", str(out)])
        lines = capsys.readouterr().out.splitlines()
        identity = [line for line in lines if "residual_identity" in line]
        assert identity and all(line.startswith("PASS") for line in identity)
        assert code == (EXIT_OK if all(line.startswith("PASS") for line in lines) else EXIT_FAIL)
        assert out.exists()

    def test_zero_trials(self):
        assert main(["validate", "--trials", "0"]) == EXIT_USAGE

    def test_alphas_need_half(self):
        assert main(["validate", "--alphas", "0.3,0.4"]) == EXIT_USAGE


class TestAnalyze:
    def test_mse(self, tmp_path):
        out = tmp_path / "mse.csv"
        assert main(["analyze", "mse", "--samples", "2000", "--out", str(out)]) == EXIT_OK
        rows = read_rows(out)[1:]
        css = [r for r in rows if r.startswith("css")]
        rate = [r for r in rows if r.startswith("rate")]
        assert [r.split(",")[1] for r in css] == ["2", "3", "4", "5", "6"]
        assert [r.split(",")[1] for r in rate] == ["4", "8", "16", "32", "64"]

    def test_residual(self, tmp_path):
        out = tmp_path / "res.json"
        assert main(["analyze", "residual", "--alphas", "0.4,0.5", "--trials", "1000", "--out", str(out)]) == EXIT_OK
        rows = json.loads(out.read_text())["rows"]
        assert {r["alpha"] for r in rows} == {0.4, 0.5}
        assert sum(r["count"] for r in rows if r["alpha"] == 0.5) == 1000

    def test_energy_zero_spikes(self, tmp_path):
        net = tmp_path / "silent.json"
        save_network(NetworkSpec((2,), [Layer("dense", [[1.0, 1.0]], [-10.0]), Layer("relu"), Layer("dense", [[1.0]])]), net)
        cal = tmp_path / "cal.json"
        save_calibration(CalibrationResult({1: 1.0}, 99.99, 1), cal)
        zeros = tmp_path / "zeros.json"
        save_dataset(np.zeros((5, 2)), None, zeros)
        out = tmp_path / "e.json"
        args = ["analyze", "energy", "--network", str(net), "--calibration", str(cal), "--dataset", str(zeros), "--out", str(out)]
        assert main(args) == EXIT_OK
        rows = json.loads(out.read_text())["rows"]
        assert [r["ac_count"] for r in rows] == [0, 0]
        assert all(r["total_pj"] == r["mac_count"] * r["e_mac_pj"] for r in rows)

    def test_ablation(self, tmp_path, calib_file):
        out = tmp_path / "a.csv"
        args = ["analyze", "ablation", "--network", MLP, "--calibration", str(calib_file), "--dataset", MLP_TEST]
        assert main(args + ["--precharges", "0,1", "--out", str(out)]) == EXIT_OK
        assert len(read_rows(out)) == 1 + 4

    def test_unknown_analysis(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["analyze", "spectrum", "--out", str(tmp_path / "x.csv")])
        assert exc.value.code == EXIT_USAGE

    def test_config_overrides(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"css-T": [3], "rate-T": [8], "samples": 100}))
        out = tmp_path / "mse.csv"
        assert main(["analyze", "mse", "--out", str(out), "--config", str(cfg)]) == EXIT_OK
        assert len(read_rows(out)) == 3

    def test_config_unknown_key(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"colour": 1}))
        assert main(["analyze", "mse", "--out", str(tmp_path / "m.csv"), "--config", str(cfg)]) == EXIT_USAGE
