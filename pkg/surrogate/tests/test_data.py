import numpy as np
import pytest
import torch
from torch.utils.data import DataLoader

from phcsurrogate import (
    F1Dataset,
    F2Dataset,
    Normalization,
    SplitManifest,
    load_pcbd_for_task,
    read_pcbd,
)


class TestNormalization:
    def test_midpoint(self):
        norm = Normalization(0.0, 8.0)
        assert norm.forward(4.0) == 0.0
        assert norm.forward(0.0) == -1.0 and norm.forward(8.0) == 1.0

    def test_round_trip_property(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            lo = rng.uniform(0, 2)
            hi = lo + rng.uniform(0.5, 8)
            norm = Normalization(lo, hi)
            omega = rng.uniform(lo - 1, hi + 1, size=(5, 4, 4))
            back = norm.inverse(norm.forward(omega))
            assert np.abs(back - omega).max() <= 1e-6 * max(1.0, np.abs(omega).max())


class TestF1:
    def test_band_channel_is_n_over_L(self, f1_dataset_path):
        ds = load_pcbd_for_task(
            str(f1_dataset_path), "f1", str(f1_dataset_path) + ".split.json",
            "train", band_range=(3, 3),
        )
        x, y = ds[0]
        assert x.shape == (2, 16, 16) and y.shape == (1, 16, 16)
        assert torch.allclose(x[1], torch.full_like(x[1], 0.3))
        assert set(x[0].unique().tolist()) <= {0.0, 1.0}

    def test_batch_shapes(self, f1_dataset_path):
        ds = load_pcbd_for_task(
            str(f1_dataset_path), "f1", str(f1_dataset_path) + ".split.json",
            "train",
        )
        x, y = next(iter(DataLoader(ds, batch_size=16)))
        assert x.shape == (16, 2, 16, 16)
        assert y.shape == (16, 1, 16, 16)

    def test_sample_count(self, f1_dataset_path):
        ds = load_pcbd_for_task(
            str(f1_dataset_path), "f1", str(f1_dataset_path) + ".split.json",
            "train", band_range=(1, 5),
        )
        assert len(ds) == 16 * 5

    def test_fraction_halves_cells(self, f1_dataset_path):
        full = load_pcbd_for_task(
            str(f1_dataset_path), "f1", str(f1_dataset_path) + ".split.json",
            "train", band_range=(6, 10), fraction=1.0,
        )
        half = load_pcbd_for_task(
            str(f1_dataset_path), "f1", str(f1_dataset_path) + ".split.json",
            "train", band_range=(6, 10), fraction=0.5,
        )
        assert len(half) == len(full) // 2

    def test_targets_are_normalized(self, f1_dataset_path):
        ds = load_pcbd_for_task(
            str(f1_dataset_path), "f1", str(f1_dataset_path) + ".split.json",
            "train",
        )
        ys = torch.stack([ds[i][1] for i in range(0, len(ds), 7)])
        assert ys.min() >= -1.0 - 1e-6 and ys.max() <= 1.0 + 1e-6

    def test_rejects_f2_shaped_file(self, f2_dataset_path):
        data = read_pcbd(str(f2_dataset_path))
        manifest = SplitManifest.load(str(f2_dataset_path) + ".split.json")
        with pytest.raises(ValueError):
            F1Dataset(data, manifest, "train")


class TestF2:
    def test_shapes(self, f2_dataset_path):
        ds = load_pcbd_for_task(
            str(f2_dataset_path), "f2", str(f2_dataset_path) + ".split.json",
            "train",
        )
        x, y = ds[0]
        assert x.shape == (1, 16, 16)
        assert y.shape == (1, 64, 64)

    def test_rejects_f1_shaped_file(self, f1_dataset_path):
        data = read_pcbd(str(f1_dataset_path))
        manifest = SplitManifest.load(str(f1_dataset_path) + ".split.json")
        with pytest.raises(ValueError):
            F2Dataset(data, manifest, "train")

    def test_low_surface_normalizes_like_truth(self, f2_dataset_path):
        data = read_pcbd(str(f2_dataset_path))
        manifest = SplitManifest.load(str(f2_dataset_path) + ".split.json")
        ds = F2Dataset(data, manifest, "test")
        x, y = ds[0]
        norm = ds.norm
        rec = ds.records[0]
        assert np.allclose(
            norm.inverse(x.squeeze(0).numpy()), rec.surfaces[16][0], atol=1e-5
        )
