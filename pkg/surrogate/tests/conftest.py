"""Fixtures: desk-scale datasets produced through the band pipeline CLI.

The surrogate package consumes the pipeline only through its published
files, so fixtures shell out to the `phcbands` executable rather than
importing the library.
"""

import pathlib
import subprocess
import sys

import pytest
import torch

torch.set_num_threads(2)


def run_cli(*args):
    cmd = [sys.executable, "-m", "phcbands.cli", *args]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode == 0, f"{cmd}: {proc.stdout}\n{proc.stderr}"
    return proc


@pytest.fixture(scope="session")
def f1_dataset_path(tmp_path_factory) -> pathlib.Path:
    """20 cells at m=16, single 16x16 k-grid, L=10 (task F1, low-res flavor)."""
    root = tmp_path_factory.mktemp("f1data")
    cells = root / "cells"
    bands = root / "bands.pcbd"
    out = root / "f1.pcbd"
    run_cli("gen-cells", "--n", "20", "--m", "16", "--seed", "101",
            "--out", str(cells))
    run_cli("solve-bands", "--cells", str(cells), "--m-kgrid", "16",
            "--bands", "10", "--mode", "TE", "--workers", "2",
            "--out", str(bands))
    run_cli("make-dataset", "--bands-file", str(bands), "--task", "f1",
            "--split-seed", "7", "--out", str(out))
    return out


@pytest.fixture(scope="session")
def f2_dataset_path(tmp_path_factory) -> pathlib.Path:
    """50 cells at m=16 with 16x16 and 64x64 k-grids (task F2)."""
    root = tmp_path_factory.mktemp("f2data")
    cells = root / "cells"
    bands = root / "bands.pcbd"
    out = root / "f2.pcbd"
    run_cli("gen-cells", "--n", "50", "--m", "16", "--seed", "202",
            "--out", str(cells))
    run_cli("solve-bands", "--cells", str(cells), "--m-kgrid", "16",
            "--m-kgrid", "64", "--bands", "10", "--mode", "TE",
            "--workers", "2", "--out", str(bands))
    run_cli("make-dataset", "--bands-file", str(bands), "--task", "f2",
            "--split-seed", "7", "--out", str(out))
    return out
