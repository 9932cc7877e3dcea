import numpy as np
import pytest

from phcsurrogate import SplitManifest, read_pcbd
from phcsurrogate.pcbd import PcbdReadError


class TestReader:
    def test_reads_pipeline_output(self, f1_dataset_path):
        data = read_pcbd(str(f1_dataset_path))
        assert data.m_cell == 16 and data.L == 10
        assert data.resolutions == (16,)
        assert data.mode == "TE"
        assert len(data.records) == 20
        rec = data.records[0]
        assert rec.mask.shape == (16, 16)
        assert set(np.unique(rec.mask)) <= {0, 1}
        assert rec.surfaces[16].shape == (10, 16, 16)
        assert rec.surfaces[16].dtype == np.float32

    def test_cross_checks_against_pipeline_library(self, f1_dataset_path):
        # oracle for the independent reader implementation (test-only import)
        import phcbands

        meta, records = phcbands.read_pcbd(str(f1_dataset_path))
        ours = read_pcbd(str(f1_dataset_path))
        assert (meta.m_cell, meta.L, meta.resolutions) == (
            ours.m_cell, ours.L, ours.resolutions
        )
        for a, b in zip(records, ours.records):
            assert a.cell_id == b.cell_id
            assert np.array_equal(a.mask.cells, b.mask)
            assert np.array_equal(a.surfaces[16].omega, b.surfaces[16])

    def test_corruption_detected(self, f1_dataset_path, tmp_path):
        raw = bytearray(f1_dataset_path.read_bytes())
        raw[50] ^= 0x04
        bad = tmp_path / "bad.pcbd"
        bad.write_bytes(bytes(raw))
        with pytest.raises(PcbdReadError):
            read_pcbd(str(bad))

    def test_truncation_detected(self, f1_dataset_path, tmp_path):
        raw = f1_dataset_path.read_bytes()
        bad = tmp_path / "short.pcbd"
        bad.write_bytes(raw[: len(raw) // 3])
        with pytest.raises(PcbdReadError):
            read_pcbd(str(bad))


class TestManifest:
    def test_loads_split_and_normalization(self, f1_dataset_path):
        manifest = SplitManifest.load(str(f1_dataset_path) + ".split.json")
        assert len(manifest.train) == 16
        assert len(manifest.val) == 2
        assert len(manifest.test) == 2
        assert manifest.omega_max > manifest.omega_min >= 0.0

    def test_missing_normalization_rejected(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text('{"seed": 0, "train": [], "val": [], "test": [], '
                        '"normalization": null}')
        with pytest.raises(PcbdReadError):
            SplitManifest.load(str(path))
