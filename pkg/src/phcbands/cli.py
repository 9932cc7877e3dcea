"""Pipeline orchestration as subcommands with reproducible configuration.

Every command validates its inputs, writes an effective-config snapshot
(with a config hash) next to its outputs, and is idempotent for a fixed
configuration. Exit codes: 0 ok, 2 config error, 3 compute error,
4 I/O error; failures print a machine-readable JSON object to stderr.
"""

from __future__ import annotations

import functools
import hashlib
import json
import os
import sys

import click
import numpy as np

from . import figures
from .bandsweep import sweep
from .cells import generate_p4m_cell, mask_from_text, mask_to_text
from .datasets import (
    PcbdMeta,
    SplitManifest,
    make_split,
    normalization_stats,
    read_pcbd,
    write_pcbd,
)
from .errors import ComputeError, DataFormatError, InputError, PhcError
from .metrics import bilinear_upsample, mre

EXIT_CONFIG = 2
EXIT_COMPUTE = 3
EXIT_IO = 4


def config_hash(config: dict) -> str:
    """Stable short hash of a config dict; embedded in every output."""
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _write_snapshot(out_path: str, config: dict) -> dict:
    config = dict(config)
    config["config_hash"] = config_hash(config)
    with open(out_path + ".config.json", "w") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return config


def _fail(exc: Exception, code: int) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    click.echo(json.dumps(payload), err=True)
    sys.exit(code)


def handle_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (InputError, click.UsageError) as exc:
            _fail(exc, EXIT_CONFIG)
        except ComputeError as exc:
            _fail(exc, EXIT_COMPUTE)
        except (DataFormatError, OSError) as exc:
            _fail(exc, EXIT_IO)
        except PhcError as exc:  # anything else from this package
            _fail(exc, EXIT_COMPUTE)

    return wrapper


@click.group()
def main():
    """Photonic-crystal band structure pipeline."""


@main.command("gen-cells")
@click.option("--n", type=int, required=True, help="Number of cells.")
@click.option("--m", type=int, default=16, show_default=True, help="Pixels per side.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--features", type=int, default=3, show_default=True,
              help="Air features per cell draw.")
@click.option("--out", type=click.Path(), required=True, help="Archive directory.")
@handle_errors
def gen_cells(n, m, seed, features, out):
    """Generate a p4m cell archive: one text mask per cell plus a manifest."""
    if n < 1:
        raise InputError("--n must be >= 1")
    os.makedirs(out, exist_ok=True)
    config = {"command": "gen-cells", "n": n, "m": m, "seed": seed,
              "features": features}
    entries = []
    for i in range(n):
        cell_seed = seed * 1_000_003 + i
        mask = generate_p4m_cell(cell_seed, m, features)
        mask = type(mask)(m, mask.cells, cell_id=i, seed=cell_seed)
        fname = f"cell_{i:06d}.txt"
        with open(os.path.join(out, fname), "w") as fh:
            fh.write(mask_to_text(mask))
        entries.append({"cell_id": i, "seed": cell_seed, "file": fname})
    manifest = {
        "config": config,
        "config_hash": config_hash(config),
        "m": m,
        "cells": entries,
    }
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    click.echo(f"wrote {n} cells to {out}")


def load_cell_archive(path: str):
    """Masks from a gen-cells archive directory, in manifest order."""
    manifest_path = os.path.join(path, "manifest.json")
    if not os.path.exists(manifest_path):
        raise InputError(f"no manifest.json in {path}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    masks = []
    for entry in manifest["cells"]:
        with open(os.path.join(path, entry["file"])) as fh:
            masks.append(
                mask_from_text(fh.read(), cell_id=entry["cell_id"],
                               seed=entry["seed"])
            )
    return manifest, masks


@main.command("solve-bands")
@click.option("--cells", "cells_dir", type=click.Path(exists=True), required=True,
              help="Cell archive from gen-cells.")
@click.option("--m-kgrid", "resolutions", type=int, multiple=True, required=True,
              help="k-grid side; repeat for several resolutions.")
@click.option("--bands", type=int, default=10, show_default=True)
@click.option("--mode", type=click.Choice(["TE", "TM"]), default="TE",
              show_default=True)
@click.option("--tol", type=float, default=1e-8, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True,
              envvar="PHC_WORKERS")
@click.option("--validate", type=click.Choice(["off", "spot", "full"]),
              default="spot", show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Output PCBD file.")
@handle_errors
def solve_bands(cells_dir, resolutions, bands, mode, tol, workers, validate, out):
    """Sweep an archive into band surfaces and write a PCBD dataset."""
    manifest, masks = load_cell_archive(cells_dir)
    config = {
        "command": "solve-bands", "cells": os.path.abspath(cells_dir),
        "cells_hash": manifest["config_hash"], "m_kgrid": sorted(resolutions),
        "bands": bands, "mode": mode, "tol": tol, "validate": validate,
    }
    failures = []
    progress_path = out + ".progress.jsonl"
    with open(progress_path, "w") as progress:
        records = list(
            sweep(
                masks, mode, resolutions, L=bands, tol=tol, workers=workers,
                validate=validate,
                on_failure=failures.append,
                on_progress=lambda ev: print(json.dumps(ev), file=progress),
            )
        )
    if failures:
        with open(out + ".failures.jsonl", "w") as fh:
            for f in failures:
                fh.write(json.dumps(
                    {"cell_id": f.cell_id, "stage": f.stage, "message": f.message}
                ) + "\n")
    meta = PcbdMeta(
        m_cell=manifest["m"], L=bands, resolutions=tuple(sorted(resolutions)),
        mode=mode,
    )
    n_bytes = write_pcbd(records, out, meta)
    _write_snapshot(out, config)
    click.echo(
        f"wrote {len(records)} records ({n_bytes} bytes) to {out}; "
        f"{len(failures)} failures"
    )
    if failures:
        sys.exit(EXIT_COMPUTE)


@main.command("make-dataset")
@click.option("--bands-file", "bands_files", type=click.Path(exists=True),
              multiple=True, required=True, help="PCBD inputs; repeatable.")
@click.option("--task", type=click.Choice(["f1", "f2"]), required=True)
@click.option("--split-seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Output PCBD file.")
@handle_errors
def make_dataset(bands_files, task, split_seed, out):
    """Merge solve-bands outputs into a task dataset with a split manifest.

    Task f1 needs single-resolution records (cell structure -> band
    surface); task f2 needs two resolutions a factor 4 apart
    (low-resolution surface -> high-resolution surface).
    """
    metas, records = [], []
    for path in bands_files:
        meta, recs = read_pcbd(path)
        metas.append(meta)
        records.extend(recs)
    if any(m != metas[0] for m in metas):
        raise InputError("input PCBD files disagree on meta")
    meta = metas[0]
    if task == "f1" and len(meta.resolutions) != 1:
        raise InputError(f"task f1 needs one resolution, got {meta.resolutions}")
    if task == "f2":
        if len(meta.resolutions) != 2 or (
            meta.resolutions[1] != 4 * meta.resolutions[0]
        ):
            raise InputError(
                f"task f2 needs two resolutions a factor 4 apart, "
                f"got {meta.resolutions}"
            )
    ids = [r.cell_id for r in records]
    if len(set(ids)) != len(ids):
        raise InputError("duplicate cell_ids across input files")
    split = make_split(ids, split_seed)
    split.normalization = normalization_stats(records, split)
    write_pcbd(records, out, meta)
    split.save(out + ".split.json")
    config = {
        "command": "make-dataset", "task": task, "split_seed": split_seed,
        "inputs": [os.path.abspath(p) for p in bands_files],
        "m_cell": meta.m_cell, "mesh_m": meta.mesh_m, "L": meta.L,
        "resolutions": list(meta.resolutions), "mode": meta.mode,
        "n_records": len(records),
    }
    _write_snapshot(out, config)
    click.echo(f"wrote {len(records)} records to {out} (+ split manifest)")


def _stack_for_split(records, split_ids):
    chosen = [r for r in records if r.cell_id in split_ids]
    if not chosen:
        raise InputError("no records in the requested split")
    return chosen


@main.command("baseline-sr")
@click.option("--dataset", type=click.Path(exists=True), required=True,
              help="f2-style PCBD with two resolutions.")
@click.option("--factor", type=int, default=4, show_default=True)
@click.option("--split", type=click.Choice(["train", "val", "test", "all"]),
              default="test", show_default=True)
@click.option("--report", "report_path", type=click.Path(), required=True)
@click.option("--csv", "csv_path", type=click.Path(), default=None,
              help="Optional per-band CSV table.")
@handle_errors
def baseline_sr(dataset, factor, split, report_path, csv_path):
    """Bilinear super-resolution baseline: upsample low-res, score against high."""
    meta, records = read_pcbd(dataset)
    if len(meta.resolutions) != 2:
        raise InputError("baseline-sr needs a two-resolution dataset")
    low, high = meta.resolutions
    if high != factor * low:
        raise InputError(
            f"resolutions {meta.resolutions} do not match factor {factor}"
        )
    if split == "all":
        chosen = records
    else:
        manifest = SplitManifest.load(dataset + ".split.json")
        chosen = _stack_for_split(records, set(manifest.split_ids(split)))
    pred = np.stack(
        [bilinear_upsample(r.surfaces[low].omega.astype(float), factor)
         for r in chosen]
    )
    truth = np.stack([r.surfaces[high].omega.astype(float) for r in chosen])
    report = mre(pred, truth, dataset=os.path.basename(dataset), split=split)
    report.save(report_path)
    if csv_path:
        report.to_csv(csv_path)
    click.echo(
        f"bilinear x{factor} baseline on {len(chosen)} cells ({split}): "
        f"aggregate MRE {100 * report.aggregate_mre:.2f}%"
    )


@main.command("metrics")
@click.option("--pred", type=click.Path(exists=True), required=True)
@click.option("--truth", type=click.Path(exists=True), required=True)
@click.option("--report", "report_path", type=click.Path(), required=True)
@click.option("--csv", "csv_path", type=click.Path(), default=None)
@handle_errors
def metrics_cmd(pred, truth, report_path, csv_path):
    """Mean relative error between two PCBD files, matched by cell_id."""
    meta_p, recs_p = read_pcbd(pred)
    meta_t, recs_t = read_pcbd(truth)
    if meta_p.L != meta_t.L:
        raise InputError("band counts differ between pred and truth")
    common = sorted(
        set(r.cell_id for r in recs_p) & set(r.cell_id for r in recs_t)
    )
    if not common:
        raise InputError("no common cell_ids between pred and truth")
    res = sorted(set(meta_p.resolutions) & set(meta_t.resolutions))
    if not res:
        raise InputError("no common resolution between pred and truth")
    r = res[-1]
    by_id_p = {rec.cell_id: rec for rec in recs_p}
    by_id_t = {rec.cell_id: rec for rec in recs_t}
    pred_stack = np.stack(
        [by_id_p[c].surfaces[r].omega.astype(float) for c in common]
    )
    truth_stack = np.stack(
        [by_id_t[c].surfaces[r].omega.astype(float) for c in common]
    )
    report = mre(pred_stack, truth_stack, dataset=os.path.basename(truth))
    report.save(report_path)
    if csv_path:
        report.to_csv(csv_path)
    click.echo(
        f"MRE over {len(common)} cells at resolution {r}: "
        f"{100 * report.aggregate_mre:.2f}%"
    )


@main.command("export-figures")
@click.option("--dataset", type=click.Path(exists=True), default=None)
@click.option("--report", "report_path", type=click.Path(exists=True), default=None)
@click.option("--out-dir", type=click.Path(), required=True)
@click.option("--max-cells", type=int, default=4, show_default=True)
@handle_errors
def export_figures(dataset, report_path, out_dir, max_cells):
    """Band-surface panels (PNG) from a dataset and/or tables from a report."""
    if dataset is None and report_path is None:
        raise InputError("need --dataset and/or --report")
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if dataset is not None:
        meta, records = read_pcbd(dataset)
        for r in meta.resolutions:
            sub = os.path.join(out_dir, f"res_{r}")
            written += figures.export_dataset_figures(
                records, r, sub, max_cells=max_cells
            )
    if report_path is not None:
        from .metrics import MetricReport

        with open(report_path) as fh:
            report = MetricReport.from_json(fh.read())
        csv_path = os.path.join(out_dir, "mre_table.csv")
        figures.save_report_csv(report, csv_path)
        png_path = os.path.join(out_dir, "mre_per_band.png")
        figures.save_mre_bar(report, png_path)
        written += [csv_path, png_path]
    click.echo(f"wrote {len(written)} files to {out_dir}")


if __name__ == "__main__":
    main()
