import csv
import json

import pytest

from ordinoise import cli
from ordinoise import config as cfg
from ordinoise import harness


def smoke_raw(out_dir, methods=None, seeds=None, folds=(0,)):
    return {
        "dataset": {
            "kind": "blobs",
            "counts": [100, 100, 100, 100],
            "feature_scale": 0.6,
            "seed": 7,
        },
        "noise": {"family": "quasi_gaussian", "strength": 0.1, "seed": 11},
        "split": {"folds": 5, "seed": 13, "run_folds": list(folds)},
        "methods": methods
        or [
            {
                "method": "coteaching",
                "update_label": "soft",
                "epochs": 5,
                "noise_rate": 0.2,
                "batch_size": 32,
                "hidden_units": 8,
            },
            {
                "method": "standard",
                "epochs": 5,
                "noise_rate": 0.2,
                "batch_size": 32,
                "hidden_units": 8,
            },
        ],
        "seeds": list(seeds or [0]),
        "output_dir": str(out_dir),
    }


def write_config(tmp_path, raw, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return path


class TestRunExperiment:
    def test_smoke_run_writes_declared_files(self, tmp_path):
        out = tmp_path / "results"
        experiment = cfg.resolve(smoke_raw(out))
        outcome = harness.run_experiment(experiment, jobs=1)
        assert outcome.exit_code == 0
        assert outcome.config_json.is_file()
        assert outcome.grid_csv.is_file()
        epochs_csvs = sorted((out / "runs").glob("*.epochs.csv"))
        summaries = sorted((out / "runs").glob("*.summary.json"))
        assert len(epochs_csvs) == 2
        assert len(summaries) == 2
        header = epochs_csvs[0].read_text().splitlines()[0]
        assert header == (
            "epoch,train_loss,acc_net1,acc_net2,acc_mean,mae_mean,mf1_mean,"
            "label_precision,selected_count"
        )
        assert outcome.digest in outcome.grid_csv.name
        for path in epochs_csvs + summaries:
            assert outcome.digest in path.name

    def test_grid_row_count(self, tmp_path):
        out = tmp_path / "results"
        raw = smoke_raw(out, seeds=[0, 1], folds=(0, 1))
        outcome = harness.run_experiment(cfg.resolve(raw), jobs=1)
        with open(outcome.grid_csv) as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == 2 * 2 * 2  # methods x folds x seeds
        assert set(rows[0]) == set(harness.GRID_CSV_COLUMNS)

    def test_rerun_is_byte_identical(self, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        harness.run_experiment(cfg.resolve(smoke_raw(out_a)), jobs=1)
        harness.run_experiment(cfg.resolve(smoke_raw(out_b)), jobs=1)
        csvs_a = sorted((out_a / "runs").glob("*.epochs.csv"))
        csvs_b = sorted((out_b / "runs").glob("*.epochs.csv"))
        assert len(csvs_a) == len(csvs_b) > 0
        for a, b in zip(csvs_a, csvs_b):
            assert a.name == b.name
            assert a.read_bytes() == b.read_bytes()

    def test_resolved_config_replays_bit_identically(self, tmp_path):
        out_a = tmp_path / "a"
        outcome = harness.run_experiment(cfg.resolve(smoke_raw(out_a)), jobs=1)
        replay_raw = json.loads(outcome.config_json.read_text())
        replay_raw["output_dir"] = str(tmp_path / "b")
        replayed = harness.run_experiment(cfg.resolve(replay_raw), jobs=1)
        assert replayed.digest == outcome.digest
        for a in sorted((out_a / "runs").glob("*.epochs.csv")):
            b = tmp_path / "b" / "runs" / a.name
            assert b.read_bytes() == a.read_bytes()

    def test_failed_cell_recorded_and_others_continue(self, tmp_path):
        out = tmp_path / "results"
        methods = [
            {
                "method": "standard",
                "epochs": 5,
                "noise_rate": 0.2,
                "batch_size": 32,
                "hidden_units": 8,
            },
            {
                # batch larger than the training split: fails at run time
                "method": "standard",
                "epochs": 5,
                "noise_rate": 0.2,
                "batch_size": 4096,
                "hidden_units": 8,
            },
        ]
        outcome = harness.run_experiment(cfg.resolve(smoke_raw(out, methods=methods)), jobs=1)
        assert outcome.exit_code == 3
        errors = [r["error"] for r in outcome.rows]
        assert errors.count("") == 1
        assert any("batch_size" in e for e in errors)
        with open(outcome.grid_csv) as handle:
            rows = list(csv.DictReader(handle))
        assert sum(1 for r in rows if r["error"]) == 1

    def test_all_cells_failing_exit_code(self, tmp_path):
        out = tmp_path / "results"
        methods = [
            {
                "method": "standard",
                "epochs": 5,
                "noise_rate": 0.2,
                "batch_size": 4096,
                "hidden_units": 8,
            }
        ]
        outcome = harness.run_experiment(cfg.resolve(smoke_raw(out, methods=methods)), jobs=1)
        assert outcome.exit_code == 2

    def test_worker_pool_matches_serial(self, tmp_path):
        serial = harness.run_experiment(
            cfg.resolve(smoke_raw(tmp_path / "serial", seeds=[0, 1])), jobs=1
        )
        pooled = harness.run_experiment(
            cfg.resolve(smoke_raw(tmp_path / "pooled", seeds=[0, 1])), jobs=2
        )
        for a in sorted((tmp_path / "serial" / "runs").glob("*.epochs.csv")):
            b = tmp_path / "pooled" / "runs" / a.name
            assert b.read_bytes() == a.read_bytes()
        assert serial.digest == pooled.digest

    def test_summary_json_contents(self, tmp_path):
        out = tmp_path / "results"
        harness.run_experiment(cfg.resolve(smoke_raw(out)), jobs=1)
        summary = json.loads(
            sorted((out / "runs").glob("*coteaching*.summary.json"))[0].read_text()
        )
        assert summary["method"] == "coteaching"
        assert summary["epoch_count"] == 5
        assert "acc_mean" in summary["last_k"]
        assert "label_precision" in summary["last_k"]
        assert summary["noise_report"]["realized_flip_fraction"] > 0.1

    def test_csv_dataset_round_trip(self, tmp_path):
        # materialize a dataset with gen-data, then run an experiment from the CSV
        gen = harness.gen_data(cfg.resolve(smoke_raw(tmp_path / "gen")))
        raw = smoke_raw(tmp_path / "run")
        raw["dataset"] = {"kind": "csv", "path": str(gen.dataset_csv)}
        outcome = harness.run_experiment(cfg.resolve(raw), jobs=1)
        assert outcome.exit_code == 0
        assert len(list((tmp_path / "run" / "runs").glob("*.epochs.csv"))) == 2

    def test_target_rate_resolves_strength(self, tmp_path):
        raw = smoke_raw(tmp_path / "results")
        raw["noise"] = {"family": "quasi_gaussian", "target_rate": 0.2, "seed": 11}
        outcome = harness.run_experiment(cfg.resolve(raw), jobs=1)
        resolved = json.loads(outcome.config_json.read_text())
        assert resolved["noise"]["strength"] == pytest.approx(0.2 / (13 / 6), rel=1e-6)


class TestGenData:
    def test_writes_dataset_and_sidecar(self, tmp_path):
        raw = smoke_raw(tmp_path / "gen")
        outcome = harness.gen_data(cfg.resolve(raw))
        assert outcome.dataset_csv.is_file()
        assert outcome.sidecar_csv.is_file()
        assert outcome.matrix_csv.is_file()
        assert outcome.sample_count == 400
        lines = outcome.dataset_csv.read_text().splitlines()
        assert lines[0] == "id,label,f1,f2"
        assert len(lines) == 401
        assert 0.1 < outcome.realized_rate < 0.35

    def test_zero_noise_sidecar_shows_no_flips(self, tmp_path):
        raw = smoke_raw(tmp_path / "gen")
        raw["noise"] = {"family": "none"}
        raw["methods"][0]["noise_rate"] = 0.2
        raw["methods"][1]["noise_rate"] = 0.2
        outcome = harness.gen_data(cfg.resolve(raw))
        assert outcome.realized_rate == 0.0
        assert outcome.matrix_csv is None
        with open(outcome.sidecar_csv) as handle:
            rows = list(csv.DictReader(handle))
        assert all(r["clean_label"] == r["noisy_label"] for r in rows)

    def test_rerun_is_byte_identical(self, tmp_path):
        raw = smoke_raw(tmp_path / "gen")
        first = harness.gen_data(cfg.resolve(raw))
        first_bytes = first.dataset_csv.read_bytes(), first.sidecar_csv.read_bytes()
        second = harness.gen_data(cfg.resolve(raw))
        assert second.dataset_csv.read_bytes() == first_bytes[0]
        assert second.sidecar_csv.read_bytes() == first_bytes[1]


class TestCli:
    def test_validate_config_ok(self, tmp_path, capsys):
        path = write_config(tmp_path, smoke_raw(tmp_path / "out"))
        assert cli.main(["validate-config", "--config", str(path)]) == 0
        printed = capsys.readouterr().out
        assert json.loads(printed)["split"]["folds"] == 5

    def test_validate_config_bad(self, tmp_path, capsys):
        path = write_config(tmp_path, {"methods": []})
        assert cli.main(["validate-config", "--config", str(path)]) == 1
        assert "config error" in capsys.readouterr().err

    def test_run_and_plot_end_to_end(self, tmp_path, capsys):
        out = tmp_path / "results"
        path = write_config(tmp_path, smoke_raw(out))
        assert cli.main(["run", "--config", str(path), "--jobs", "1"]) == 0
        assert cli.main(["plot", "--out", str(out)]) == 0
        svgs = sorted((out / "plots").glob("*.svg"))
        names = {p.name.split(".")[0] for p in svgs}
        assert {"acc_mean", "mae_mean", "mf1_mean", "label_precision"} <= names
        precision_svg = next(p for p in svgs if p.name.startswith("label_precision"))
        body = precision_svg.read_text()
        assert "<svg" in body
        # the 1 - noise rate reference line is labeled in the legend
        assert "random selection (1 - noise rate)" in body

    def test_plot_empty_dir_errors(self, tmp_path, capsys):
        assert cli.main(["plot", "--out", str(tmp_path)]) == 2
        assert "no run summaries" in capsys.readouterr().err

    def test_gen_data_prints_rate(self, tmp_path, capsys):
        path = write_config(tmp_path, smoke_raw(tmp_path / "gen"))
        assert cli.main(["gen-data", "--config", str(path)]) == 0
        assert "realized noise rate" in capsys.readouterr().out

    def test_out_override(self, tmp_path):
        path = write_config(tmp_path, smoke_raw(tmp_path / "ignored"))
        override = tmp_path / "override"
        assert cli.main(["run", "--config", str(path), "--jobs", "1", "--out", str(override)]) == 0
        assert (override / "runs").is_dir()
        assert not (tmp_path / "ignored").exists()

    def test_seed_override_replaces_seed_list(self, tmp_path):
        path = write_config(tmp_path, smoke_raw(tmp_path / "seeded", seeds=[0, 1, 2]))
        assert cli.main(["run", "--config", str(path), "--jobs", "1", "--seed", "5"]) == 0
        runs = sorted((tmp_path / "seeded" / "runs").glob("*.epochs.csv"))
        assert len(runs) == 2  # one per method, single overridden seed
        assert all("seed5" in p.name for p in runs)

    def test_missing_config_file(self, tmp_path, capsys):
        assert cli.main(["run", "--config", str(tmp_path / "absent.json")]) == 2

    def test_partial_failure_exit_code(self, tmp_path):
        raw = smoke_raw(tmp_path / "partial")
        raw["methods"][1]["batch_size"] = 4096
        path = write_config(tmp_path, raw)
        assert cli.main(["run", "--config", str(path), "--jobs", "1"]) == 3


class TestAtomicWrite:
    def test_no_temp_file_left_behind(self, tmp_path):
        target = tmp_path / "grid.csv"
        harness.atomic_write_text(target, "a,b\n1,2\n")
        assert target.read_text() == "a,b\n1,2\n"
        assert list(tmp_path.iterdir()) == [target]

    def test_overwrite_existing(self, tmp_path):
        target = tmp_path / "grid.csv"
        target.write_text("old")
        harness.atomic_write_text(target, "new")
        assert target.read_text() == "new"
