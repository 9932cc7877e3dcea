"""Task datasets over PCBD files: structure-to-band (F1) and
super-resolution (F2) samples with the manifest's affine normalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch.utils.data import Dataset as TorchDataset

from .pcbd import Dataset, SplitManifest, read_pcbd


@dataclass(frozen=True)
class Normalization:
    """Affine map omega -> 2 (omega - lo) / (hi - lo) - 1 and its inverse."""

    lo: float
    hi: float

    def forward(self, omega):
        return 2.0 * (omega - self.lo) / (self.hi - self.lo) - 1.0

    def inverse(self, scaled):
        return (scaled + 1.0) * (self.hi - self.lo) / 2.0 + self.lo


class F1Dataset(TorchDataset):
    """(mask, n/L channel) -> normalized band surface, one sample per band."""

    def __init__(self, data: Dataset, manifest: SplitManifest, split: str,
                 band_range: tuple[int, int] | None = None,
                 fraction: float = 1.0):
        if len(data.resolutions) != 1:
            raise ValueError(
                f"task F1 needs a single-resolution dataset, got "
                f"{data.resolutions}"
            )
        (self.resolution,) = data.resolutions
        if data.m_cell != self.resolution:
            raise ValueError("F1 expects the k-grid to match the cell size")
        self.L = data.L
        lo, hi = band_range or (1, data.L)
        if not 1 <= lo <= hi <= data.L:
            raise ValueError(f"band range {lo}..{hi} outside 1..{data.L}")
        self.bands = list(range(lo, hi + 1))
        self.norm = Normalization(manifest.omega_min, manifest.omega_max)
        ids = _take_fraction(manifest.ids(split), fraction)
        chosen = {c: None for c in ids}
        self.records = [r for r in data.records if r.cell_id in chosen]
        if not self.records:
            raise ValueError(f"no records in split {split!r}")

    def __len__(self):
        return len(self.records) * len(self.bands)

    def __getitem__(self, idx):
        rec = self.records[idx // len(self.bands)]
        band = self.bands[idx % len(self.bands)]
        mask = rec.mask.astype(np.float32)
        channel = np.full_like(mask, band / self.L)
        x = torch.from_numpy(np.stack([mask, channel]))
        omega = rec.surfaces[self.resolution][band - 1].astype(np.float32)
        y = torch.from_numpy(self.norm.forward(omega)[None]).float()
        return x, y


class F2Dataset(TorchDataset):
    """Normalized low-resolution surface -> normalized high-resolution one."""

    def __init__(self, data: Dataset, manifest: SplitManifest, split: str,
                 band_range: tuple[int, int] | None = None,
                 fraction: float = 1.0):
        if len(data.resolutions) != 2:
            raise ValueError(
                f"task F2 needs two resolutions, got {data.resolutions}"
            )
        self.low, self.high = data.resolutions
        if self.high != 4 * self.low:
            raise ValueError(
                f"resolutions {data.resolutions} are not a factor 4 apart"
            )
        self.L = data.L
        lo, hi = band_range or (1, data.L)
        self.bands = list(range(lo, hi + 1))
        self.norm = Normalization(manifest.omega_min, manifest.omega_max)
        ids = set(_take_fraction(manifest.ids(split), fraction))
        self.records = [r for r in data.records if r.cell_id in ids]
        if not self.records:
            raise ValueError(f"no records in split {split!r}")

    def __len__(self):
        return len(self.records) * len(self.bands)

    def __getitem__(self, idx):
        rec = self.records[idx // len(self.bands)]
        band = self.bands[idx % len(self.bands)]
        x = self.norm.forward(rec.surfaces[self.low][band - 1].astype(np.float32))
        y = self.norm.forward(rec.surfaces[self.high][band - 1].astype(np.float32))
        return (
            torch.from_numpy(x[None]).float(),
            torch.from_numpy(y[None]).float(),
        )


def load_pcbd_for_task(path: str, task: str, manifest_path: str, split: str,
                       band_range: tuple[int, int] | None = None,
                       fraction: float = 1.0):
    """File-level entry point mirroring the pipeline interface."""
    data = read_pcbd(path)
    manifest = SplitManifest.load(manifest_path)
    if task == "f1":
        return F1Dataset(data, manifest, split, band_range, fraction)
    if task == "f2":
        return F2Dataset(data, manifest, split, band_range, fraction)
    raise ValueError(f"unknown task {task!r}")


def _take_fraction(ids: list[int], fraction: float) -> list[int]:
    """Leading half (etc.) of the manifest's shuffled id list; deterministic."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    count = max(1, round(fraction * len(ids)))
    return ids[:count]
