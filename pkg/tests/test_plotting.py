import json

import pytest

from ordinoise import cli


def run_smoke(tmp_path, out_name, seeds):
    raw = {
        "dataset": {"kind": "blobs", "counts": [60, 60, 60, 60], "seed": 7},
        "noise": {"family": "quasi_gaussian", "strength": 0.1, "seed": 11},
        "split": {"folds": 5, "seed": 13, "run_folds": [0]},
        "methods": [
            {
                "method": "coteaching",
                "update_label": "soft",
                "epochs": 3,
                "warmup_epochs": 3,
                "noise_rate": 0.2,
                "batch_size": 16,
                "hidden_units": 8,
            }
        ],
        "seeds": seeds,
        "output_dir": str(tmp_path / out_name),
    }
    config_path = tmp_path / f"{out_name}.json"
    config_path.write_text(json.dumps(raw))
    assert cli.main(["run", "--config", str(config_path), "--jobs", "1"]) == 0
    return tmp_path / out_name


class TestCurveShading:
    def test_multi_series_gets_std_band(self, tmp_path):
        out = run_smoke(tmp_path, "multi", [0, 1, 2])
        assert cli.main(["plot", "--out", str(out)]) == 0
        svg = next((out / "plots").glob("acc_mean*.svg")).read_text()
        assert "PolyCollection" in svg  # the +-std fill region

    def test_single_series_has_no_band(self, tmp_path):
        out = run_smoke(tmp_path, "single", [0])
        assert cli.main(["plot", "--out", str(out)]) == 0
        svg = next((out / "plots").glob("acc_mean*.svg")).read_text()
        assert "PolyCollection" not in svg


class TestPlotErrors:
    def test_missing_epochs_csv_is_named(self, tmp_path, capsys):
        out = run_smoke(tmp_path, "broken", [0])
        victim = next((out / "runs").glob("*.epochs.csv"))
        victim.unlink()
        assert cli.main(["plot", "--out", str(out)]) == 2
        err = capsys.readouterr().err
        assert "per-epoch CSV missing" in err
        assert victim.name in err

    def test_plot_groups_by_noise_setting(self, tmp_path):
        out = run_smoke(tmp_path, "grouped", [0])
        assert cli.main(["plot", "--out", str(out)]) == 0
        names = sorted(p.name for p in (out / "plots").glob("*.svg"))
        assert all("quasi_gaussian_eps0.2" in n for n in names)
        metrics = {n.split(".")[0] for n in names}
        assert metrics == {"acc_mean", "mae_mean", "mf1_mean", "label_precision"}
