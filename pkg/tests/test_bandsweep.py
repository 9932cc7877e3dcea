import numpy as np
import pytest

from helpers_oracles import empty_lattice_lambdas
from phcbands import (
    UnitCellMask,
    band_surfaces,
    build_kgrid,
    generate_p4m_cell,
    sweep,
)
from phcbands.bandsweep import (
    BandSurface,
    DensePencilFamily,
    GridPointError,
    RealPencilFamily,
    SweepFailure,
    _orbit_groups,
)
from phcbands.blochfem import CellOperator, reduce_to_first_bz
from phcbands.errors import ComputeError, InputError


class TestBandSurface:
    def test_shape_and_dtype(self, p4m_mask16):
        surf = band_surfaces(p4m_mask16, "TE", build_kgrid(8), L=4)
        assert surf.omega.shape == (4, 8, 8)
        assert surf.omega.dtype == np.float32

    def test_gamma_band1_zero(self, p4m_mask16):
        for mode in ("TE", "TM"):
            surf = band_surfaces(p4m_mask16, mode, build_kgrid(8), L=3)
            assert surf.omega[0, 0, 0] == 0.0

    def test_pointwise_nondecreasing(self, p4m_mask16):
        surf = band_surfaces(p4m_mask16, "TM", build_kgrid(8), L=6)
        assert np.all(np.diff(surf.omega.astype(float), axis=0) >= 0)

    def test_alumina_air_scaling(self, air_mask16, alumina_mask16):
        kg = build_kgrid(4)
        air = band_surfaces(air_mask16, "TE", kg, L=4).omega.astype(float)
        alu = band_surfaces(alumina_mask16, "TE", kg, L=4).omega.astype(float)
        # exact discrete scaling: omega_alumina = omega_air / sqrt(8.9)
        assert np.abs(alu - air / np.sqrt(8.9)).max() <= 1e-6 * air.max()

    def test_rejects_bad_surface(self):
        with pytest.raises(InputError):
            BandSurface(2, 4, -np.ones((2, 4, 4), np.float32), "TE", 0)

    def test_solver_options_agree(self, p4m_mask16):
        kg = build_kgrid(4)
        dense = band_surfaces(p4m_mask16, "TE", kg, L=4, solver="dense")
        lanc = band_surfaces(p4m_mask16, "TE", kg, L=4, solver="lanczos")
        a, b = dense.omega.astype(float), lanc.omega.astype(float)
        assert np.abs(a - b).max() <= 1e-6 * max(a.max(), 1.0)

    def test_unknown_solver(self, p4m_mask16):
        with pytest.raises(InputError):
            band_surfaces(p4m_mask16, "TE", build_kgrid(4), L=2, solver="magic")


class TestEmptyLatticeSurface:
    def test_against_analytic(self, air_mask16):
        kg = build_kgrid(8)
        surf = band_surfaces(air_mask16, "TE", kg, L=5).omega.astype(float)
        pts = reduce_to_first_bz(kg.points.reshape(-1, 2))
        h = 1.0 / 16
        for flat, k in enumerate(pts):
            p, q = divmod(flat, 8)
            exact = np.sqrt(empty_lattice_lambdas(k, 5))
            # omega-space dispersion envelope; 0.89 measured at the BZ
            # corner for this mesh, asserted with margin at 1.1
            bound = 1.1 * (exact * h) ** 2 * exact + 1e-6
            assert np.all(np.abs(surf[:, p, q] - exact) <= bound)

    def test_band1_equals_reduced_k_norm(self, air_mask16):
        kg = build_kgrid(8)
        surf = band_surfaces(air_mask16, "TE", kg, L=1).omega.astype(float)
        pts = reduce_to_first_bz(kg.points.reshape(-1, 2))
        for flat, k in enumerate(pts):
            p, q = divmod(flat, 8)
            assert abs(surf[0, p, q] - np.linalg.norm(k)) <= 1e-5

    def test_convergence_order_band2(self, air_mask16):
        k = np.array([0.8, 0.3])
        errs = []
        for m in (8, 16, 32):
            mask = UnitCellMask(m, np.ones((m, m), np.uint8))
            fam = DensePencilFamily(CellOperator(mask, "TE"))
            lam = fam.eigenvalues(k, 2)[1]
            errs.append(abs(lam - empty_lattice_lambdas(k, 2)[1]))
        orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
        assert min(orders) >= 1.8


class TestSymmetryIdentities:
    def test_negation_identity_any_mask(self, rng):
        cells = (rng.random((8, 8)) < 0.5).astype(np.uint8)
        cells[0, 0], cells[1, 0] = 0, 1
        op = CellOperator(UnitCellMask(8, cells), "TE")
        fam = DensePencilFamily(op)
        k = rng.uniform(-np.pi, np.pi, 2)
        a = fam.eigenvalues(k, 5)
        b = fam.eigenvalues(-k, 5)
        assert np.abs(a - b).max() <= 1e-10 * max(abs(a).max(), 1.0)

    def test_transpose_identity_p4m_mask(self, te_operator, rng):
        fam = DensePencilFamily(te_operator)
        k = rng.uniform(-np.pi, np.pi, 2)
        a = fam.eigenvalues(k, 5)
        b = fam.eigenvalues(k[::-1], 5)
        assert np.abs(a - b).max() <= 1e-9 * max(abs(a).max(), 1.0)

    def test_real_family_matches_complex(self, p4m_mask16, rng):
        for mode in ("TE", "TM"):
            op = CellOperator(p4m_mask16, mode)
            fc, fr = DensePencilFamily(op), RealPencilFamily(op)
            for _ in range(3):
                k = rng.uniform(-np.pi, np.pi, 2)
                a, b = fc.eigenvalues(k, 6), fr.eigenvalues(k, 6)
                assert np.abs(a - b).max() <= 1e-9 * max(abs(a).max(), 1.0)

    def test_real_family_eigenpairs_residual(self, te_operator, rng):
        fam = RealPencilFamily(te_operator)
        k = rng.uniform(-np.pi, np.pi, 2)
        w, X = fam.eigenpairs(k, 5)
        p = te_operator.pencil(k)
        BX = p.B @ X
        res = np.linalg.norm(p.A @ X - BX * w[None, :], axis=0)
        assert res.max() <= 1e-9 * np.linalg.norm(BX, axis=0).min()
        gram = X.conj().T @ BX
        assert np.abs(gram - np.eye(5)).max() <= 1e-10

    def test_real_family_rejects_asymmetric(self, rng):
        cells = np.zeros((8, 8), np.uint8)
        cells[1, 2] = 1  # not point-symmetric
        with pytest.raises(InputError):
            RealPencilFamily(CellOperator(UnitCellMask(8, cells), "TE"))

    def test_surface_symmetry_p4m(self, p4m_mask16):
        surf = band_surfaces(p4m_mask16, "TE", build_kgrid(8), L=5)
        om = surf.omega.astype(float)
        rev = (-np.arange(8)) % 8
        assert np.array_equal(om, om.transpose(0, 2, 1))
        assert np.array_equal(om, om[:, rev][:, :, rev])


class TestOrbitGroups:
    @pytest.mark.parametrize("m,transpose", [(7, False), (8, True), (16, True)])
    def test_partition(self, m, transpose):
        groups = _orbit_groups(m, transpose)
        seen = [f for members in groups.values() for f in members]
        assert sorted(seen) == list(range(m * m))
        for rep, members in groups.items():
            assert rep == min(members)


class TestSweep:
    def test_record_shapes(self, p4m_mask16):
        records = list(sweep([p4m_mask16], "TE", [8], L=10, workers=1))
        assert len(records) == 1
        assert records[0].surfaces[8].omega.shape == (10, 8, 8)

    def test_empty_cell_list(self):
        assert list(sweep([], "TE", [8], L=2)) == []

    def test_worker_determinism(self):
        cells = [generate_p4m_cell(s, 8, 2) for s in range(3)]
        runs = []
        for workers in (1, 4):
            recs = list(sweep(cells, "TE", [4, 8], L=4, workers=workers))
            runs.append(
                [(r.cell_id, {k: v.omega.tobytes() for k, v in r.surfaces.items()})
                 for r in recs]
            )
        assert runs[0] == runs[1]

    def test_output_order_is_input_order(self):
        cells = [generate_p4m_cell(s, 8, 2) for s in (5, 1, 9)]
        recs = list(sweep(cells, "TE", [4], L=2, workers=2))
        assert [r.cell_id for r in recs] == [c.cell_id for c in cells]

    def test_failure_manifest_and_continue(self, monkeypatch):
        import phcbands.bandsweep as bs

        cells = [generate_p4m_cell(s, 8, 2) for s in range(3)]
        orig = bs.band_surfaces

        def flaky(mask, *args, **kwargs):
            if mask.cell_id == cells[1].cell_id:
                raise ComputeError("synthetic failure")
            return orig(mask, *args, **kwargs)

        monkeypatch.setattr(bs, "band_surfaces", flaky)
        failures: list[SweepFailure] = []
        recs = list(
            sweep(cells, "TE", [4], L=2, workers=2, on_failure=failures.append)
        )
        assert [r.cell_id for r in recs] == [cells[0].cell_id, cells[2].cell_id]
        assert len(failures) == 1 and failures[0].cell_id == cells[1].cell_id

    def test_grid_point_error_tagging(self, p4m_mask16, monkeypatch):
        import phcbands.eigensolve as es

        monkeypatch.setattr(es, "_MAX_STEPS_PER_L", 1)
        with pytest.raises(GridPointError) as err:
            band_surfaces(p4m_mask16, "TE", build_kgrid(4), L=6, solver="lanczos")
        assert err.value.grid_index == (0, 0)

    def test_progress_events(self, p4m_mask16):
        events = []
        list(sweep([p4m_mask16], "TE", [4], L=2, on_progress=events.append))
        assert events == [{"event": "cell_done", "cell_id": p4m_mask16.cell_id}]

    def test_validation_full_passes(self, p4m_mask16):
        surf = band_surfaces(p4m_mask16, "TE", build_kgrid(4), L=3,
                             validate="full")
        assert surf.omega.shape == (3, 4, 4)
