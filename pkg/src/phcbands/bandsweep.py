"""Band surfaces omega_n(k) over k-grids, and batch sweeps of cell lists.

Units are a = c = 1 throughout, so omega = sqrt(lambda) is
dimensionless. Surface tensors are indexed omega[n, p, q] with p the
k_x index (row-major), matching the PCBD container layout.

Sweeps exploit three exact identities to stay affordable:

* k is reduced to its first-BZ representative before assembly
  (gauge-exact; the dispersion error of the shifted-gradient form grows
  steeply for unreduced k).
* spec(A(-k)) = spec(conj A(k)) = spec(A(k)^T) = spec(A(k)) for every
  mask, and spec at (ky, kx) equals spec at (kx, ky) for
  transpose-symmetric masks, so only one grid point per orbit is solved
  and the rest are assigned.
* for point-symmetric masks (all p4m cells), conj(A(k)) = P A(k) P with
  P the node point-reflection, so U = (I + iP)/sqrt(2) turns the pencil
  real symmetric: with B = LL^T Cholesky-reduced once per cell, every
  grid point is a single *real* LAPACK eigensolve, about 2.5x cheaper
  than the complex one.

Grid points are solved independently (no state leaks between them), so
results are identical for any processing order and any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np
import scipy.linalg as sla

from .blochfem import CellOperator, KGrid, build_kgrid, reduce_to_first_bz
from .cells import UnitCellMask
from .eigensolve import clamp_lambdas, solve_lowest
from .errors import ComputeError, InputError

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover - threadpoolctl ships with scipy stacks
    threadpool_limits = None

#: meshes up to this many dofs solve grid points with dense LAPACK
DENSE_FAMILY_MAX_N = 2048
#: one in this many solved grid points gets a full eigenpair residual check
SPOT_CHECK_STRIDE = 64


@dataclass(frozen=True)
class BandSurface:
    """First-L band frequencies on an m x m k-grid.

    omega is float32 (the container precision), shaped (L, m, m) with
    omega[n, p, q] = sqrt(lambda_{n+1}(k_pq)) and p the k_x index.
    """

    L: int
    m: int
    omega: np.ndarray
    mode: str
    cell_id: int

    def __post_init__(self):
        om = np.ascontiguousarray(np.asarray(self.omega, dtype=np.float32))
        if om.shape != (self.L, self.m, self.m):
            raise InputError(
                f"omega has shape {om.shape}, expected {(self.L, self.m, self.m)}"
            )
        if not np.all(np.isfinite(om)) or om.min() < 0:
            raise InputError("band frequencies must be finite and nonnegative")
        object.__setattr__(self, "omega", om)


@dataclass(frozen=True)
class DatasetRecord:
    """One labeled sample: a cell mask plus its band surfaces by k-resolution."""

    cell_id: int
    mask: UnitCellMask
    surfaces: dict[int, BandSurface]

    def __post_init__(self):
        for res, surf in self.surfaces.items():
            if surf.m != res:
                raise InputError(f"surface at key {res} has grid side {surf.m}")
            if surf.cell_id != self.cell_id:
                raise InputError("surface cell_id differs from record cell_id")
        counts = {s.L for s in self.surfaces.values()}
        if len(counts) > 1:
            raise InputError(f"surfaces disagree on band count: {counts}")


@dataclass(frozen=True)
class SweepFailure:
    """One failed cell in a sweep; serialized to the failure manifest."""

    cell_id: int
    stage: str
    message: str


class GridPointError(ComputeError):
    """Solver failure tagged with its (p, q) grid location."""

    def __init__(self, p: int, q: int, cause: Exception):
        super().__init__(f"solver failed at grid point (p={p}, q={q}): {cause}")
        self.grid_index = (p, q)
        self.cause = cause


class DensePencilFamily:
    """All-k dense solver for one cell via the congruence B = LL^T.

    With B fixed per cell, L^-1 A(k) L^-H = St + i kx Cxt + i ky Cyt +
    |k|^2 Mt for four real transformed matrices computed once, so each
    grid point is a single standard Hermitian eigensolve.
    """

    def __init__(self, op: CellOperator):
        self.op = op
        d = op.dense_structs()
        self._chol = sla.cholesky(d["B"], lower=True)

        def transform(X: np.ndarray) -> np.ndarray:
            Y = sla.solve_triangular(self._chol, X, lower=True)
            return sla.solve_triangular(self._chol, Y.T, lower=True).T

        self._S = transform(d["S"])
        self._Cx = transform(d["Cx"])
        self._Cy = transform(d["Cy"])
        self._Ma = transform(d["Ma"])

    def standard_matrix(self, k) -> np.ndarray:
        kx, ky = float(k[0]), float(k[1])
        return (
            self._S
            + (kx * kx + ky * ky) * self._Ma
            + 1j * (kx * self._Cx + ky * self._Cy)
        )

    def eigenvalues(self, k, L: int) -> np.ndarray:
        return np.linalg.eigvalsh(self.standard_matrix(k))[:L]

    def eigenpairs(self, k, L: int) -> tuple[np.ndarray, np.ndarray]:
        """Lowest-L values and B-orthonormal vectors of the pencil at k."""
        w, Y = sla.eigh(self.standard_matrix(k), subset_by_index=(0, L - 1))
        X = sla.solve_triangular(self._chol, Y, lower=True, trans="C")
        return w, X


class RealPencilFamily:
    """Dense solver specialization for point-symmetric (e.g. p4m) masks.

    conj(A(k)) = P A(k) P with P the point-reflection node permutation,
    so conjugating by U = (I + iP)/sqrt(2) makes the pencil real: S, Ma
    and B are P-invariant and stay put, while i*Cx maps to the real
    symmetric (P Cx - Cx P)/2. Eigensolves then run in real arithmetic.
    """

    def __init__(self, op: CellOperator):
        m = op.m
        idx = np.arange(m)
        gi, gj = np.meshgrid(idx, idx, indexing="ij")
        perm = (((-gi) % m) * m + (-gj) % m).ravel()
        self.op = op
        self._perm = perm

        d = op.dense_structs()
        if not np.allclose(d["S"][perm][:, perm], d["S"], atol=1e-13):
            raise InputError("mask is not point-symmetric; real reduction invalid")
        cx, cy = d["Cx"], d["Cy"]
        wx = (cx[perm, :] - cx[:, perm]) / 2.0
        wy = (cy[perm, :] - cy[:, perm]) / 2.0

        self._chol = sla.cholesky(d["B"], lower=True)

        def transform(X: np.ndarray) -> np.ndarray:
            Y = sla.solve_triangular(self._chol, X, lower=True)
            return sla.solve_triangular(self._chol, Y.T, lower=True).T

        self._S = transform(d["S"])
        self._Wx = transform(wx)
        self._Wy = transform(wy)
        self._Ma = transform(d["Ma"])

    def standard_matrix(self, k) -> np.ndarray:
        kx, ky = float(k[0]), float(k[1])
        return (
            self._S
            + (kx * kx + ky * ky) * self._Ma
            + kx * self._Wx
            + ky * self._Wy
        )

    def eigenvalues(self, k, L: int) -> np.ndarray:
        return np.linalg.eigvalsh(self.standard_matrix(k))[:L]

    def eigenpairs(self, k, L: int) -> tuple[np.ndarray, np.ndarray]:
        w, Y = sla.eigh(self.standard_matrix(k), subset_by_index=(0, L - 1))
        Z = sla.solve_triangular(self._chol, Y, lower=True, trans="T")
        X = (Z + 1j * Z[self._perm, :]) / np.sqrt(2.0)  # undo U-conjugation
        return w, X


def band_surfaces(
    mask: UnitCellMask,
    mode: str,
    kgrid: KGrid,
    L: int,
    tol: float = 1e-8,
    solver: str = "auto",
    validate: str = "spot",
) -> BandSurface:
    """Solve the pencil at every grid point and stack omega_n = sqrt(lambda_n).

    solver: "auto" picks dense LAPACK (real-reduced where the mask
    allows) up to DENSE_FAMILY_MAX_N dofs and shift-invert Lanczos
    beyond; "dense" and "lanczos" force a family. validate: "off",
    "spot" (every SPOT_CHECK_STRIDE-th solved point gets an eigenpair
    residual and B-orthonormality check) or "full". Grid values are
    deterministic for any processing order; solver failures re-raise as
    GridPointError tagged with (p, q).
    """
    if L < 1:
        raise InputError("need at least one band")
    if solver not in ("auto", "dense", "lanczos"):
        raise InputError(f"unknown solver {solver!r}")
    if validate not in ("off", "spot", "full"):
        raise InputError(f"unknown validation mode {validate!r}")
    op = CellOperator(mask, mode, a=kgrid.a)
    lams = _grid_lambdas(op, kgrid, L, tol, solver, validate)
    omega = np.sqrt(np.maximum(clamp_lambdas(lams.reshape(-1, L)), 0.0))
    omega = omega.reshape(kgrid.m, kgrid.m, L).transpose(2, 0, 1)
    return BandSurface(L, kgrid.m, omega, mode, mask.cell_id)


def _orbit_groups(m: int, transpose_symmetric: bool) -> dict[int, list[int]]:
    """Group flat grid indices into exact-identity orbits.

    Negation (p, q) -> (-p, -q) mod m preserves the spectrum for every
    mask (conjugation/transposition identity); the index swap
    (p, q) -> (q, p) additionally requires a transpose-symmetric mask.
    The smallest flat index of an orbit is its representative.
    """
    groups: dict[int, list[int]] = {}
    for p in range(m):
        for q in range(m):
            flat = p * m + q
            orbit = {flat, ((-p) % m) * m + (-q) % m}
            if transpose_symmetric:
                orbit |= {q * m + p, ((-q) % m) * m + (-p) % m}
            rep = min(orbit)
            if rep == flat:
                groups[rep] = sorted(orbit)
    return groups


def _grid_lambdas(
    op: CellOperator, kgrid: KGrid, L: int, tol: float, solver: str, validate: str
) -> np.ndarray:
    m = kgrid.m
    # grid points live on [0, 2*pi/a)^2; assembly uses the first-BZ
    # representative, which is gauge-exact and far more accurate
    points = reduce_to_first_bz(kgrid.points.reshape(-1, 2), kgrid.a)

    cells = op.mask.cells
    point_symmetric = np.array_equal(cells, cells[::-1, ::-1])
    transpose_symmetric = np.array_equal(cells, cells.T)

    family = None
    if solver == "dense" or (solver == "auto" and op.n_dof <= DENSE_FAMILY_MAX_N):
        family = RealPencilFamily(op) if point_symmetric else DensePencilFamily(op)

    groups = _orbit_groups(m, transpose_symmetric)
    lams = np.empty((m * m, L))
    for count, (rep, members) in enumerate(sorted(groups.items())):
        k = points[rep]
        p, q = divmod(rep, m)
        try:
            if family is not None:
                values = family.eigenvalues(k, L)
                if validate == "full" or (
                    validate == "spot" and count % SPOT_CHECK_STRIDE == 0
                ):
                    _check_point(op, family, k, L, tol)
            else:
                result = solve_lowest(op.pencil(k), L, tol=tol)
                values = result.lambdas
        except ComputeError as exc:
            raise GridPointError(p, q, exc) from exc
        for flat in members:
            lams[flat] = values
    return lams


def _check_point(op: CellOperator, family, k, L: int, tol: float) -> None:
    """Eigenpair-level verification of a dense-family grid point."""
    w, X = family.eigenpairs(k, L)
    A = op.matrix(k)
    BX = op.B @ X
    residuals = np.linalg.norm(A @ X - BX * w[None, :], axis=0)
    residuals /= np.linalg.norm(BX, axis=0)
    gram = X.conj().T @ BX
    ortho = np.abs(gram - np.eye(L)).max()
    if residuals.max() > max(tol, 1e-9) or ortho > 1e-8:
        raise ComputeError(
            f"dense grid solve failed verification at k={k}: "
            f"residual {residuals.max():.2e}, orthonormality defect {ortho:.2e}"
        )


def sweep(
    cells: Sequence[UnitCellMask],
    mode: str,
    resolutions: Iterable[int],
    L: int = 10,
    tol: float = 1e-8,
    workers: int = 1,
    validate: str = "spot",
    on_failure: Callable[[SweepFailure], None] | None = None,
    on_progress: Callable[[dict], None] | None = None,
) -> Iterator[DatasetRecord]:
    """Compute one DatasetRecord per cell, in input order.

    Cells are processed in a thread pool (the heavy LAPACK/sparse kernels
    release the GIL); records come out in input order regardless of the
    worker count, and failed cells are reported through on_failure while
    the sweep continues. BLAS pools are pinned to one thread for the
    duration so the outer pool owns all parallelism.
    """
    resolutions = sorted(set(int(r) for r in resolutions))
    if any(r < 2 for r in resolutions):
        raise InputError("k-grid resolutions must be >= 2")
    if workers < 1:
        raise InputError("workers must be >= 1")
    grids = {r: build_kgrid(r) for r in resolutions}

    def one_cell(mask: UnitCellMask) -> DatasetRecord:
        surfaces = {
            r: band_surfaces(mask, mode, grids[r], L, tol=tol, validate=validate)
            for r in resolutions
        }
        return DatasetRecord(mask.cell_id, mask, surfaces)

    def run() -> Iterator[DatasetRecord]:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(one_cell, mask) for mask in cells]
            for mask, future in zip(cells, futures):
                try:
                    record = future.result()
                except ComputeError as exc:
                    failure = SweepFailure(mask.cell_id, "solve", str(exc))
                    if on_failure is not None:
                        on_failure(failure)
                    continue
                if on_progress is not None:
                    on_progress({"event": "cell_done", "cell_id": mask.cell_id})
                yield record

    if threadpool_limits is not None:
        with threadpool_limits(limits=1):
            yield from run()
    else:  # pragma: no cover
        yield from run()
