"""Figure and table export: imagesc-style band panels and CSV summaries."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bandsweep import DatasetRecord
from .metrics import MetricReport


def save_band_panel(record: DatasetRecord, resolution: int, path: str) -> None:
    """One PNG per record: the cell mask plus each band surface as an image.

    Surfaces are drawn with k_x horizontal and the origin at the lower
    left, matching the omega[n, p, q] index convention.
    """
    surface = record.surfaces[resolution]
    n_panels = surface.L + 1
    n_cols = min(4, n_panels)
    n_rows = (n_panels + n_cols - 1) // n_cols
    fig, axes = plt.subplots(
        n_rows, n_cols, figsize=(3.2 * n_cols, 2.8 * n_rows), squeeze=False
    )
    flat_axes = axes.ravel()

    ax = flat_axes[0]
    ax.imshow(record.mask.cells.T, origin="lower", cmap="gray_r", vmin=0, vmax=1)
    ax.set_title(f"cell {record.cell_id} (white=alumina)")
    ax.set_xticks([])
    ax.set_yticks([])

    vmax = float(surface.omega.max())
    for n in range(surface.L):
        ax = flat_axes[n + 1]
        im = ax.imshow(
            surface.omega[n].T, origin="lower", cmap="viridis", vmin=0.0, vmax=vmax
        )
        ax.set_title(f"band {n + 1}")
        ax.set_xticks([])
        ax.set_yticks([])
    for ax in flat_axes[n_panels:]:
        ax.axis("off")
    fig.colorbar(im, ax=axes, shrink=0.8, label="omega (a=c=1)")
    fig.savefig(path, dpi=110)
    plt.close(fig)


def export_dataset_figures(
    records, resolution: int, out_dir: str, max_cells: int = 4
) -> list[str]:
    """Band panels for the first few records; returns written paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for record in records[:max_cells]:
        path = os.path.join(out_dir, f"cell_{record.cell_id:06d}_bands.png")
        save_band_panel(record, resolution, path)
        written.append(path)
    return written


def save_report_csv(report: MetricReport, path: str) -> None:
    report.to_csv(path)


def save_mre_bar(report: MetricReport, path: str) -> None:
    """Per-band MRE bar chart for a metric report."""
    values = [100 * v if v is not None else np.nan for v in report.per_band_mre]
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.bar(np.arange(1, len(values) + 1), values, color="tab:blue")
    ax.axhline(
        100 * report.aggregate_mre, color="tab:red", ls="--",
        label=f"aggregate {100 * report.aggregate_mre:.2f}%",
    )
    ax.set_xlabel("band")
    ax.set_ylabel("MRE [%]")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
