"""Evaluation metric (MRE), training loss, and the interpolation baseline.

All functions are pure and operate on plain arrays shaped (..., L, m, m)
with the band axis third from the right, so single surfaces and whole
record stacks evaluate the same way.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import InputError

#: entries with |truth| below this are excluded from relative errors
MRE_DELTA = 1e-8

#: JSON Schema for serialized MetricReport payloads (shared with consumers)
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
    """Mean relative error per band plus the pooled aggregate.

    aggregate_mre is the mean of |pred - truth| / |truth| over every
    included entry of every band (not the mean of the per-band means);
    entries with |truth| < delta are excluded and counted.
    """

    per_band_mre: list[float]
    aggregate_mre: float
    excluded_per_band: list[int]
    excluded_total: int
    included_total: int
    delta: float = MRE_DELTA
    dataset: str | None = None
    split: str | None = None

    def to_json(self) -> str:
        payload = {
            "aggregate_mre": self.aggregate_mre,
            "per_band_mre": self.per_band_mre,
            "excluded_per_band": self.excluded_per_band,
            "excluded_total": self.excluded_total,
            "included_total": self.included_total,
            "delta": self.delta,
            "dataset": self.dataset,
            "split": self.split,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MetricReport":
        p = json.loads(text)
        return cls(
            per_band_mre=p["per_band_mre"],
            aggregate_mre=p["aggregate_mre"],
            excluded_per_band=p["excluded_per_band"],
            excluded_total=p["excluded_total"],
            included_total=p["included_total"],
            delta=p.get("delta", MRE_DELTA),
            dataset=p.get("dataset"),
            split=p.get("split"),
        )

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")

    def to_csv(self, path: str) -> None:
        """Per-band table in the style of the result tables: band, MRE %."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["band", "mre_percent"])
            for n, value in enumerate(self.per_band_mre, start=1):
                writer.writerow([n, "" if value is None else f"{100 * value:.4f}"])
            writer.writerow(["aggregate", f"{100 * self.aggregate_mre:.4f}"])


def mre(
    pred: np.ndarray,
    truth: np.ndarray,
    delta: float = MRE_DELTA,
    dataset: str | None = None,
    split: str | None = None,
) -> MetricReport:
    """Mean relative error |pred - truth| / |truth| with near-zero exclusion.

    Arrays must share a shape of the form (..., L, m1, m2); the per-band
    breakdown runs over the third-from-last axis.
    """
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise InputError(f"shape mismatch: pred {pred.shape} vs truth {truth.shape}")
    if pred.ndim < 3:
        raise InputError("expected at least (L, m, m) arrays")
    if delta < 0:
        raise InputError("delta must be nonnegative")
    L = pred.shape[-3]
    included = np.abs(truth) >= delta
    if not included.any():
        raise InputError("all entries excluded by the near-zero threshold")
    rel = np.zeros_like(truth)
    np.divide(np.abs(pred - truth), np.abs(truth), out=rel, where=included)

    band_axis = pred.ndim - 3
    other_axes = tuple(ax for ax in range(pred.ndim) if ax != band_axis)
    inc_band = included.sum(axis=other_axes)
    sum_band = rel.sum(axis=other_axes)
    per_band = [
        float(s / c) if c > 0 else None for s, c in zip(sum_band, inc_band)
    ]
    total_entries = int(np.prod(pred.shape))
    return MetricReport(
        per_band_mre=per_band,
        aggregate_mre=float(rel.sum() / included.sum()),
        excluded_per_band=[int(total_entries // L - c) for c in inc_band],
        excluded_total=int(total_entries - included.sum()),
        included_total=int(included.sum()),
        delta=delta,
        dataset=dataset,
        split=split,
    )


def mse_loss(pred_batch: np.ndarray, truth_batch: np.ndarray) -> float:
    """Mean squared error over batch and pixels (1/(m^2 N) Frobenius scaling)."""
    pred_batch = np.asarray(pred_batch, dtype=float)
    truth_batch = np.asarray(truth_batch, dtype=float)
    if pred_batch.shape != truth_batch.shape:
        raise InputError(
            f"shape mismatch: {pred_batch.shape} vs {truth_batch.shape}"
        )
    return float(np.mean((pred_batch - truth_batch) ** 2))


def bilinear_upsample(surface: np.ndarray, factor: int = 4) -> np.ndarray:
    """Separable bilinear upsampling on the periodic k-torus.

    Operates on the trailing two axes of any (..., m, m) array; target
    sample t maps to source coordinate t/factor with wrap-around at the
    period seam, so source points are reproduced exactly and affine
    patches interpolate exactly away from the seam.
    """
    surface = np.asarray(surface, dtype=float)
    if surface.ndim < 2 or surface.shape[-1] != surface.shape[-2]:
        raise InputError("expected square trailing axes")
    m = surface.shape[-1]
    if m < 2:
        raise InputError("need at least a 2x2 grid to interpolate")
    if factor < 1:
        raise InputError("factor must be a positive integer")
    t = np.arange(m * factor)
    i0 = t // factor
    i1 = (i0 + 1) % m
    frac = (t % factor) / factor

    def interp_last(arr: np.ndarray) -> np.ndarray:
        return arr[..., i0] * (1.0 - frac) + arr[..., i1] * frac

    up_q = interp_last(surface)                      # interpolate along q
    up_pq = interp_last(np.moveaxis(up_q, -2, -1))   # then along p
    return np.moveaxis(up_pq, -1, -2)
