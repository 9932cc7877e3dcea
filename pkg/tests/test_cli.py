import json
import os

import numpy as np
import pytest
from click.testing import CliRunner

from phcbands import read_pcbd
from phcbands.cli import main
from phcbands.metrics import bilinear_upsample, mre


@pytest.fixture
def runner():
    return CliRunner()


def run_ok(runner, args, **kwargs):
    result = runner.invoke(main, args, catch_exceptions=False, **kwargs)
    assert result.exit_code == 0, result.output
    return result


def archive_bytes(path):
    out = {}
    for name in sorted(os.listdir(path)):
        with open(os.path.join(path, name), "rb") as fh:
            out[name] = fh.read()
    return out


class TestGenCells:
    def test_idempotent_archives(self, runner, tmp_path):
        a, b = str(tmp_path / "a"), str(tmp_path / "b")
        run_ok(runner, ["gen-cells", "--n", "4", "--m", "16", "--seed", "7",
                        "--out", a])
        run_ok(runner, ["gen-cells", "--n", "4", "--m", "16", "--seed", "7",
                        "--out", b])
        assert archive_bytes(a) == archive_bytes(b)

    def test_manifest_contents(self, runner, tmp_path):
        out = str(tmp_path / "cells")
        run_ok(runner, ["gen-cells", "--n", "3", "--m", "16", "--seed", "1",
                        "--out", out])
        manifest = json.load(open(os.path.join(out, "manifest.json")))
        assert len(manifest["cells"]) == 3
        assert manifest["m"] == 16
        assert "config_hash" in manifest

    def test_bad_n_exits_2_with_json(self, runner, tmp_path):
        result = runner.invoke(
            main, ["gen-cells", "--n", "0", "--out", str(tmp_path / "x")]
        )
        assert result.exit_code == 2
        payload = json.loads(result.output.strip().splitlines()[-1])
        assert payload["error"] == "InputError"


@pytest.fixture(scope="module")
def small_pipeline(tmp_path_factory):
    """Shared tiny pipeline: 10 cells at m=16, k-grids 4 and 16."""
    root = tmp_path_factory.mktemp("pipeline")
    runner = CliRunner()
    cells = str(root / "cells")
    bands = str(root / "bands.pcbd")
    dataset = str(root / "f2.pcbd")
    run_ok(runner, ["gen-cells", "--n", "10", "--m", "16", "--seed", "3",
                    "--out", cells])
    run_ok(runner, ["solve-bands", "--cells", cells, "--m-kgrid", "4",
                    "--m-kgrid", "16", "--bands", "10", "--mode", "TE",
                    "--workers", "2", "--out", bands])
    run_ok(runner, ["make-dataset", "--bands-file", bands, "--task", "f2",
                    "--split-seed", "5", "--out", dataset])
    return {"root": root, "cells": cells, "bands": bands, "dataset": dataset}


class TestSolveBands:
    def test_record_shapes(self, small_pipeline):
        meta, records = read_pcbd(small_pipeline["bands"])
        assert meta.L == 10 and meta.resolutions == (4, 16)
        assert len(records) == 10
        assert records[0].surfaces[16].omega.shape == (10, 16, 16)

    def test_snapshot_written(self, small_pipeline):
        config = json.load(open(small_pipeline["bands"] + ".config.json"))
        assert config["command"] == "solve-bands"
        assert "config_hash" in config

    def test_progress_manifest(self, small_pipeline):
        lines = open(small_pipeline["bands"] + ".progress.jsonl").read()
        events = [json.loads(l) for l in lines.strip().splitlines()]
        assert len(events) == 10
        assert all(e["event"] == "cell_done" for e in events)


class TestMakeDataset:
    def test_split_manifest(self, small_pipeline):
        manifest = json.load(open(small_pipeline["dataset"] + ".split.json"))
        assert len(manifest["train"]) == 8
        assert len(manifest["val"]) == 1
        assert len(manifest["test"]) == 1
        assert manifest["normalization"]["omega_min"] >= 0.0

    def test_f1_rejects_two_resolutions(self, runner, small_pipeline, tmp_path):
        result = runner.invoke(
            main,
            ["make-dataset", "--bands-file", small_pipeline["bands"], "--task",
             "f1", "--out", str(tmp_path / "f1.pcbd")],
        )
        assert result.exit_code == 2


class TestBaselineSr:
    def test_cross_command_consistency(self, runner, small_pipeline, tmp_path):
        report_path = str(tmp_path / "baseline.json")
        run_ok(runner, ["baseline-sr", "--dataset", small_pipeline["dataset"],
                        "--split", "all", "--report", report_path])
        report = json.load(open(report_path))
        meta, records = read_pcbd(small_pipeline["dataset"])
        pred = np.stack(
            [bilinear_upsample(r.surfaces[4].omega.astype(float), 4)
             for r in records]
        )
        truth = np.stack([r.surfaces[16].omega.astype(float) for r in records])
        direct = mre(pred, truth)
        assert report["aggregate_mre"] == pytest.approx(
            direct.aggregate_mre, rel=1e-12
        )

    def test_factor_mismatch_rejected(self, runner, small_pipeline, tmp_path):
        result = runner.invoke(
            main,
            ["baseline-sr", "--dataset", small_pipeline["dataset"], "--factor",
             "2", "--report", str(tmp_path / "r.json")],
        )
        assert result.exit_code == 2


class TestMetricsCmd:
    def test_self_comparison_is_zero(self, runner, small_pipeline, tmp_path):
        report_path = str(tmp_path / "self.json")
        run_ok(runner, ["metrics", "--pred", small_pipeline["dataset"],
                        "--truth", small_pipeline["dataset"],
                        "--report", report_path])
        assert json.load(open(report_path))["aggregate_mre"] == 0.0

    def test_corrupt_file_exits_4(self, runner, small_pipeline, tmp_path):
        bad = str(tmp_path / "bad.pcbd")
        raw = bytearray(open(small_pipeline["dataset"], "rb").read())
        raw[-10] ^= 0xFF
        open(bad, "wb").write(bytes(raw))
        result = runner.invoke(
            main, ["metrics", "--pred", bad, "--truth", bad,
                   "--report", str(tmp_path / "r.json")]
        )
        assert result.exit_code == 4


class TestExportFigures:
    def test_writes_pngs_and_csv(self, runner, small_pipeline, tmp_path):
        report_path = str(tmp_path / "rep.json")
        run_ok(runner, ["baseline-sr", "--dataset", small_pipeline["dataset"],
                        "--split", "all", "--report", report_path])
        out_dir = str(tmp_path / "figs")
        run_ok(runner, ["export-figures", "--dataset",
                        small_pipeline["dataset"], "--report", report_path,
                        "--out-dir", out_dir, "--max-cells", "2"])
        assert os.path.exists(os.path.join(out_dir, "mre_table.csv"))
        assert os.path.exists(os.path.join(out_dir, "mre_per_band.png"))
        assert len(os.listdir(os.path.join(out_dir, "res_4"))) == 2


class TestWorkersEnvVar:
    def test_phc_workers_env_accepted(self, runner, tmp_path, monkeypatch):
        monkeypatch.setenv("PHC_WORKERS", "2")
        cells = str(tmp_path / "cells")
        run_ok(runner, ["gen-cells", "--n", "2", "--m", "16", "--seed", "0",
                        "--out", cells])
        run_ok(runner, ["solve-bands", "--cells", cells, "--m-kgrid", "4",
                        "--bands", "2", "--out", str(tmp_path / "b.pcbd")])


class TestComputeErrorExit:
    def test_solver_failure_exits_3(self, runner, tmp_path, monkeypatch):
        import phcbands.cli as cli_mod
        from phcbands.errors import ComputeError

        cells = str(tmp_path / "cells")
        run_ok(runner, ["gen-cells", "--n", "2", "--m", "16", "--seed", "4",
                        "--out", cells])

        def broken_sweep(*args, **kwargs):
            raise ComputeError("synthetic solver failure")
            yield  # pragma: no cover

        monkeypatch.setattr(cli_mod, "sweep", broken_sweep)
        result = runner.invoke(
            main, ["solve-bands", "--cells", cells, "--m-kgrid", "4",
                   "--bands", "2", "--out", str(tmp_path / "b.pcbd")]
        )
        assert result.exit_code == 3
        payload = json.loads(result.output.strip().splitlines()[-1])
        assert payload["error"] == "ComputeError"
