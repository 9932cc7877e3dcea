"""Lattice geometry and Bloch-periodic P1 finite element assembly.

The scalar problem on the unit cell is

    -(grad + ik) . alpha (grad + ik) u = lambda beta u,

with u periodic on the cell boundary. TE mode: alpha = 1/eps, beta = 1;
TM mode: alpha = 1, beta = eps. Each pixel is split into two isosceles
right triangles, with the diagonal alternating in a checkerboard by
pixel parity: the resulting mesh is invariant under the full p4m point
group (a uniform diagonal is not), and its dispersion error is about
half that of the uniform split. Nodes on the right/top edges are
identified with left/bottom, and all element integrals are evaluated in
closed form, so for a k-independent mesh the assembled pencil
decomposes as

    A(k) = S + i*kx*Cx + i*ky*Cy + |k|^2 * M_alpha,      B = M_beta,

with S, M_* real symmetric and Cx, Cy real antisymmetric. `CellOperator`
caches those five matrices per cell so sweeping k costs one sparse
combine per wave vector. Assembly is pure; operators and pencils are
immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .cells import UnitCellMask
from .errors import AssemblyError, InputError

EPS_ALUMINA = 8.9
EPS_AIR = 1.0

MODES = ("TE", "TM")
MODE_CODES = {"TE": 0, "TM": 1}

_MASS_PATTERN = (np.ones((3, 3)) + np.eye(3)) / 12.0  # [[2,1,1],[1,2,1],[1,1,2]]/12


@dataclass(frozen=True)
class LatticeSpec:
    """Square lattice with primitive vectors a*e1, a*e2."""

    a: float = 1.0

    @property
    def a1(self) -> np.ndarray:
        return np.array([self.a, 0.0])

    @property
    def a2(self) -> np.ndarray:
        return np.array([0.0, self.a])

    @property
    def b1(self) -> np.ndarray:
        return np.array([2.0 * np.pi / self.a, 0.0])

    @property
    def b2(self) -> np.ndarray:
        return np.array([0.0, 2.0 * np.pi / self.a])

    def ibz_vertices(self) -> dict[str, np.ndarray]:
        """Vertices of the irreducible Brillouin zone triangle."""
        p = np.pi / self.a
        return {
            "Gamma": np.array([0.0, 0.0]),
            "X": np.array([p, 0.0]),
            "M": np.array([p, p]),
        }


@dataclass(frozen=True)
class KGrid:
    """Uniform endpoint-exclusive grid over one reciprocal period.

    ``points[p, q] = (2*pi*p/(m*a), 2*pi*q/(m*a))`` for 0-based p, q, so
    the grid covers [0, 2*pi/a)^2 without duplicated torus points and
    contains Gamma at (0, 0). Index p runs along k_x.
    """

    m: int
    a: float = 1.0
    points: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.m < 2:
            raise InputError(f"k-grid needs m >= 2, got {self.m}")
        step = 2.0 * np.pi / (self.m * self.a)
        axis = step * np.arange(self.m)
        kx, ky = np.meshgrid(axis, axis, indexing="ij")
        object.__setattr__(self, "points", np.stack([kx, ky], axis=-1))


def build_kgrid(m: int, a: float = 1.0) -> KGrid:
    return KGrid(m, a)


def reduce_to_first_bz(k: np.ndarray, a: float = 1.0) -> np.ndarray:
    """Map wave vectors to their first-BZ representative in [-pi/a, pi/a).

    Band structures are periodic on the reciprocal torus, so this is
    exact for the continuous problem; discretely it matters a great
    deal, because the P1 dispersion error grows with the oscillation of
    the Bloch eigenfunctions, which is minimal for the reduced
    representative. Solvers reduce sweep wave vectors before assembly.
    """
    period = 2.0 * np.pi / a
    return np.mod(np.asarray(k, dtype=float) + period / 2.0, period) - period / 2.0


@dataclass(frozen=True)
class ModeCoefficients:
    """Per-pixel PDE coefficients for one polarization."""

    mode: str
    alpha: np.ndarray
    beta: np.ndarray


def permittivity(mask: UnitCellMask) -> np.ndarray:
    """Per-pixel relative permittivity (0 -> alumina 8.9, 1 -> air 1)."""
    return np.where(mask.cells == 1, EPS_AIR, EPS_ALUMINA)


def mode_coefficients(mask: UnitCellMask, mode: str) -> ModeCoefficients:
    if mode not in MODES:
        raise InputError(f"mode must be one of {MODES}, got {mode!r}")
    eps = permittivity(mask)
    if mode == "TE":
        return ModeCoefficients(mode, 1.0 / eps, np.ones_like(eps))
    return ModeCoefficients(mode, np.ones_like(eps), eps)


def element_matrices(
    tri: np.ndarray, alpha: float, beta: float, k: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Exact P1 element blocks on one triangle with constant coefficients.

    Returns (A_block, B_block) where A_block[i, j] integrates
    alpha*(grad phi_j + i k phi_j).(grad phi_i - i k phi_i) and
    B_block = beta * area/12 * [[2,1,1],[1,2,1],[1,1,2]].
    """
    tri = np.asarray(tri, dtype=float)
    if tri.shape != (3, 2):
        raise InputError("triangle must be 3 points in the plane")
    if alpha <= 0 or beta <= 0:
        raise InputError("coefficients alpha, beta must be positive")
    x, y = tri[:, 0], tri[:, 1]
    b = np.array([y[1] - y[2], y[2] - y[0], y[0] - y[1]])
    c = np.array([x[2] - x[1], x[0] - x[2], x[1] - x[0]])
    two_area = x[0] * b[0] + x[1] * b[1] + x[2] * b[2]
    area = abs(two_area) / 2.0
    scale = max(np.abs(tri).max(), 1.0)
    if area <= 1e-14 * scale**2:
        raise AssemblyError(f"degenerate triangle with area {area:g}")
    grads = np.stack([b, c], axis=1) / two_area  # (3, 2), constant per element
    k = np.asarray(k, dtype=float)
    stiffness = area * (grads @ grads.T)
    mass = area * _MASS_PATTERN
    kdotg = grads @ k
    convection = (area / 3.0) * (kdotg[:, None] - kdotg[None, :])
    a_block = alpha * (stiffness + 1j * convection + float(k @ k) * mass)
    return a_block, beta * mass


@dataclass(frozen=True)
class BlochPencil:
    """Assembled Hermitian pencil (A(k), B) for one cell, mode, wave vector.

    Node (i, j) of the periodic (m x m) grid maps to dof i*m + j.
    """

    n_dof: int
    A: sp.csr_matrix
    B: sp.csr_matrix
    k: np.ndarray
    m: int | None = None

    def dof_index(self, i: int, j: int) -> int:
        if self.m is None:
            raise InputError("pencil has no mesh attached")
        return (i % self.m) * self.m + (j % self.m)

    def dump_matrix_market(self, path_a: str, path_b: str) -> None:
        """Debug dump of A and B in Matrix Market coordinate format."""
        from scipy.io import mmwrite

        mmwrite(path_a, self.A.tocoo())
        mmwrite(path_b, self.B.tocoo())


class CellOperator:
    """Per-(cell, mode) assembly cache over the pixel-split triangle mesh.

    Builds the five k-independent sparse matrices once; `matrix(k)` then
    combines their aligned data arrays without touching the sparsity
    structure, which keeps repeated assembly cheap and bitwise
    reproducible. Instances are immutable and safe to share across
    threads.
    """

    def __init__(self, mask: UnitCellMask, mode: str, a: float = 1.0):
        coeffs = mode_coefficients(mask, mode)
        m = mask.m
        self.mask = mask
        self.mode = mode
        self.a = float(a)
        self.m = m
        self.n_dof = m * m
        self.h = self.a / m

        h = self.h
        # checkerboard split: even-parity pixels cut along (0,0)-(h,h),
        # odd-parity pixels along (h,0)-(0,h)
        tri_even = (
            np.array([[0.0, 0.0], [h, 0.0], [h, h]]),
            np.array([[0.0, 0.0], [h, h], [0.0, h]]),
        )
        tri_odd = (
            np.array([[0.0, 0.0], [h, 0.0], [0.0, h]]),
            np.array([[h, 0.0], [h, h], [0.0, h]]),
        )

        idx = np.arange(m)
        i_pix, j_pix = np.meshgrid(idx, idx, indexing="ij")
        i_pix, j_pix = i_pix.ravel(), j_pix.ravel()
        even = (i_pix + j_pix) % 2 == 0
        n00 = i_pix * m + j_pix
        n10 = ((i_pix + 1) % m) * m + j_pix
        n01 = i_pix * m + (j_pix + 1) % m
        n11 = ((i_pix + 1) % m) * m + (j_pix + 1) % m
        corner_dofs = {"n00": n00, "n10": n10, "n01": n01, "n11": n11}

        # (pixel subset, triangle vertices, corner names), both triangles of
        # a pixel share its coefficients
        pieces = [
            (even, tri_even[0], ("n00", "n10", "n11")),
            (even, tri_even[1], ("n00", "n11", "n01")),
            (~even, tri_odd[0], ("n00", "n10", "n01")),
            (~even, tri_odd[1], ("n10", "n11", "n01")),
        ]
        tri_dofs = np.concatenate(
            [
                np.stack([corner_dofs[c][sel] for c in corners], axis=1)
                for sel, _, corners in pieces
            ]
        )
        rows = np.repeat(tri_dofs, 3, axis=1).ravel()
        cols = np.tile(tri_dofs, (1, 3)).ravel()
        alpha_t = np.concatenate(
            [coeffs.alpha.ravel()[sel] for sel, _, _ in pieces]
        )
        beta_t = np.concatenate([coeffs.beta.ravel()[sel] for sel, _, _ in pieces])

        def global_csr(weights: np.ndarray, block_key: str) -> sp.csr_matrix:
            per_tri = np.concatenate(
                [
                    np.broadcast_to(
                        _geometry_blocks(tri)[block_key], (int(sel.sum()), 3, 3)
                    )
                    for sel, tri, _ in pieces
                ]
            )
            data = (weights[:, None, None] * per_tri).ravel()
            mat = sp.coo_matrix((data, (rows, cols)), shape=(self.n_dof, self.n_dof))
            out = mat.tocsr()
            out.sort_indices()
            return out

        self.S = global_csr(alpha_t, "stiffness")
        self.Cx = global_csr(alpha_t, "conv_x")
        self.Cy = global_csr(alpha_t, "conv_y")
        self.Ma = global_csr(alpha_t, "mass")
        self.B = global_csr(beta_t, "mass")
        # identical (rows, cols) for every build => identical csr structure
        self._indices = self.S.indices
        self._indptr = self.S.indptr

    def matrix(self, k: np.ndarray) -> sp.csr_matrix:
        """A(k), exactly Hermitian by construction."""
        kx, ky = float(k[0]), float(k[1])
        data = (
            self.S.data
            + 1j * (kx * self.Cx.data + ky * self.Cy.data)
            + (kx * kx + ky * ky) * self.Ma.data
        )
        return sp.csr_matrix(
            (data, self._indices, self._indptr), shape=(self.n_dof, self.n_dof)
        )

    def pencil(self, k: np.ndarray) -> BlochPencil:
        k = np.asarray(k, dtype=float)
        if k.shape != (2,) or not np.all(np.isfinite(k)):
            raise InputError(f"wave vector must be 2 finite components, got {k!r}")
        return BlochPencil(self.n_dof, self.matrix(k), self.B, k, m=self.m)

    def dense_structs(self) -> dict[str, np.ndarray]:
        """Dense copies of the five structure matrices (small meshes only)."""
        return {
            "S": self.S.toarray(),
            "Cx": self.Cx.toarray(),
            "Cy": self.Cy.toarray(),
            "Ma": self.Ma.toarray(),
            "B": self.B.toarray(),
        }


def assemble(mask: UnitCellMask, mode: str, k: np.ndarray, a: float = 1.0) -> BlochPencil:
    """Assemble the Bloch pencil for one wave vector.

    For sweeps over many k of the same cell, build a CellOperator once
    and call `pencil` per point instead.
    """
    return CellOperator(mask, mode, a=a).pencil(k)


def _geometry_blocks(tri: np.ndarray) -> dict[str, np.ndarray]:
    """Coefficient-free element blocks; alpha/beta scaling happens globally."""
    x, y = tri[:, 0], tri[:, 1]
    b = np.array([y[1] - y[2], y[2] - y[0], y[0] - y[1]])
    c = np.array([x[2] - x[1], x[0] - x[2], x[1] - x[0]])
    two_area = x[0] * b[0] + x[1] * b[1] + x[2] * b[2]
    area = abs(two_area) / 2.0
    if area <= 0:
        raise AssemblyError("degenerate mesh triangle")
    grads = np.stack([b, c], axis=1) / two_area
    gx, gy = grads[:, 0], grads[:, 1]
    return {
        "stiffness": area * (grads @ grads.T),
        "mass": area * _MASS_PATTERN,
        "conv_x": (area / 3.0) * (gx[:, None] - gx[None, :]),
        "conv_y": (area / 3.0) * (gy[:, None] - gy[None, :]),
    }
