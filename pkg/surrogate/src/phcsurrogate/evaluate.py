"""Evaluation: mean relative error after inverse normalization.

Reports serialize to the same JSON schema the band pipeline writes, so
either side of the toolchain can consume them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import torch

from .data import Normalization

MRE_DELTA = 1e-8

#: mirror of the band pipeline's report schema (its published interface)
METRIC_REPORT_SCHEMA = {
    "type": "object",
    "required": [
        "aggregate_mre",
        "per_band_mre",
        "excluded_per_band",
        "excluded_total",
        "included_total",
        "delta",
    ],
    "properties": {
        "aggregate_mre": {"type": "number", "minimum": 0},
        "per_band_mre": {"type": "array", "items": {"type": ["number", "null"]}},
        "excluded_per_band": {"type": "array", "items": {"type": "integer"}},
        "excluded_total": {"type": "integer", "minimum": 0},
        "included_total": {"type": "integer", "minimum": 0},
        "delta": {"type": "number", "minimum": 0},
        "dataset": {"type": ["string", "null"]},
        "split": {"type": ["string", "null"]},
    },
    "additionalProperties": True,
}


@dataclass
class MetricReport:
    per_band_mre: list
    aggregate_mre: float
    excluded_per_band: list
    excluded_total: int
    included_total: int
    delta: float = MRE_DELTA
    dataset: str | None = None
    split: str | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "aggregate_mre": self.aggregate_mre,
                "per_band_mre": self.per_band_mre,
                "excluded_per_band": self.excluded_per_band,
                "excluded_total": self.excluded_total,
                "included_total": self.included_total,
                "delta": self.delta,
                "dataset": self.dataset,
                "split": self.split,
            },
            indent=2,
            sort_keys=True,
        )

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")


def mre_tensors(pred: np.ndarray, truth: np.ndarray, delta: float = MRE_DELTA,
                dataset: str | None = None, split: str | None = None
                ) -> MetricReport:
    """MRE over (..., L, m, m) stacks; entries with |truth| < delta excluded."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {truth.shape}")
    included = np.abs(truth) >= delta
    if not included.any():
        raise ValueError("all entries excluded")
    rel = np.zeros_like(truth)
    np.divide(np.abs(pred - truth), np.abs(truth), out=rel, where=included)
    band_axis = pred.ndim - 3
    other = tuple(ax for ax in range(pred.ndim) if ax != band_axis)
    inc_band = included.sum(axis=other)
    sum_band = rel.sum(axis=other)
    per_entries = int(np.prod(pred.shape)) // pred.shape[band_axis]
    return MetricReport(
        per_band_mre=[
            float(s / c) if c else None for s, c in zip(sum_band, inc_band)
        ],
        aggregate_mre=float(rel.sum() / included.sum()),
        excluded_per_band=[int(per_entries - c) for c in inc_band],
        excluded_total=int(pred.size - included.sum()),
        included_total=int(included.sum()),
        delta=delta,
        dataset=dataset,
        split=split,
    )


@torch.no_grad()
def evaluate(model: torch.nn.Module, dataset, norm: Normalization,
             batch_size: int = 16, dataset_name: str | None = None,
             split: str | None = None) -> MetricReport:
    """Model MRE on a task dataset, after inverse normalization.

    Samples are regrouped (cells, bands, m, m) so the per-band
    breakdown matches the pipeline's convention.
    """
    from torch.utils.data import DataLoader

    model.eval()
    preds, truths = [], []
    for x, y in DataLoader(dataset, batch_size=batch_size):
        out = model(x)
        preds.append(norm.inverse(out.squeeze(1).numpy()))
        truths.append(norm.inverse(y.squeeze(1).numpy()))
    pred = np.concatenate(preds)
    truth = np.concatenate(truths)
    n_bands = len(dataset.bands)
    shape = (-1, n_bands) + pred.shape[1:]
    return mre_tensors(
        pred.reshape(shape), truth.reshape(shape),
        dataset=dataset_name, split=split,
    )
