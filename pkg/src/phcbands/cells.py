"""Square binary unit cells with p4m plane symmetry.

A cell is an m x m binary material map: 0 = alumina, 1 = air. Index
``cells[i, j]`` is the pixel whose lower-left corner sits at
``(i*h, j*h)`` with ``h = a/m``, so the first index runs along x.
All operations here are pure functions and safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import CellGenerationError, InputError

#: number of regeneration attempts before giving up on a seed
MAX_GENERATION_ATTEMPTS = 32


@dataclass(frozen=True)
class UnitCellMask:
    """One square unit cell as a binary material map.

    Attributes:
        m: pixels per side (even).
        cells: (m, m) uint8 array with values in {0, 1}; 0 = alumina, 1 = air.
        cell_id: unsigned 64-bit identifier.
        seed: unsigned 64-bit seed the cell was generated from (0 if unknown).
    """

    m: int
    cells: np.ndarray
    cell_id: int = 0
    seed: int = 0

    def __post_init__(self):
        cells = np.ascontiguousarray(np.asarray(self.cells, dtype=np.uint8))
        if cells.shape != (self.m, self.m):
            raise InputError(
                f"mask array has shape {cells.shape}, expected {(self.m, self.m)}"
            )
        if cells.max(initial=0) > 1:
            raise InputError("mask entries must be exactly 0 or 1")
        if not (0 <= self.cell_id < 2**64 and 0 <= self.seed < 2**64):
            raise InputError("cell_id and seed must fit in unsigned 64 bit")
        object.__setattr__(self, "cells", cells)

    @property
    def is_degenerate(self) -> bool:
        """True if only one material is present."""
        return bool(self.cells.min() == self.cells.max())

    def air_fraction(self) -> float:
        return float(self.cells.mean())


def d4_images(cells: np.ndarray) -> list[np.ndarray]:
    """All 8 images of a square array under the p4m point group."""
    return [
        cells,
        cells[::-1, :],          # mirror i -> m-1-i
        cells[:, ::-1],          # mirror j -> m-1-j
        cells[::-1, ::-1],       # 180 degree rotation
        cells.T,                 # main-diagonal mirror
        cells.T[::-1, :],        # 90 degree rotation
        cells.T[:, ::-1],        # 270 degree rotation
        cells.T[::-1, ::-1],     # anti-diagonal mirror
    ]


def validate_p4m(mask: UnitCellMask | np.ndarray) -> bool:
    """True iff all 8 p4m images equal the mask exactly."""
    cells = mask.cells if isinstance(mask, UnitCellMask) else np.asarray(mask)
    if cells.ndim != 2 or cells.shape[0] != cells.shape[1]:
        return False
    return all(np.array_equal(cells, img) for img in d4_images(cells))


def wedge_indices(m: int) -> list[tuple[int, int]]:
    """Pixel indices of the 1/8 fundamental wedge {(i, j): 0 <= j <= i < m/2}."""
    _require_even(m)
    h = m // 2
    return [(i, j) for i in range(h) for j in range(i + 1)]


def unfold_fundamental_domain(
    fd: Mapping[tuple[int, int], int],
    m: int,
    *,
    cell_id: int = 0,
    seed: int = 0,
) -> UnitCellMask:
    """Expand values on the 1/8 wedge to a full p4m-symmetric mask.

    ``fd`` must assign a value in {0, 1} to every wedge pixel and to
    nothing else; any index outside the wedge raises InputError.
    """
    _require_even(m)
    expected = set(wedge_indices(m))
    got = set(fd.keys())
    if got - expected:
        raise InputError(f"indices outside the wedge: {sorted(got - expected)[:4]}")
    if expected - got:
        raise InputError(f"wedge not fully covered; missing {len(expected - got)} pixels")
    h = m // 2
    quad = np.zeros((h, h), dtype=np.uint8)
    for (i, j), value in fd.items():
        if value not in (0, 1):
            raise InputError(f"wedge value at {(i, j)} must be 0 or 1, got {value}")
        quad[i, j] = value
        quad[j, i] = value
    return UnitCellMask(m, _tile_quadrant(quad), cell_id=cell_id, seed=seed)


def generate_p4m_cell(seed: int, m: int, feature_count: int = 3) -> UnitCellMask:
    """Draw a random p4m-symmetric cell; deterministic in (seed, m, feature_count).

    Random axis-aligned rectangles and disks of air are painted onto the
    alumina quadrant, symmetrized about the diagonal, and unfolded. A
    degenerate draw (single material) retries with a derived sub-seed;
    after MAX_GENERATION_ATTEMPTS the draw is reported as failed.
    """
    _require_even(m)
    if feature_count < 1:
        raise InputError("feature_count must be >= 1")
    h = m // 2
    for attempt in range(MAX_GENERATION_ATTEMPTS):
        rng = np.random.default_rng([seed, m, feature_count, attempt])
        quad = np.zeros((h, h), dtype=np.uint8)
        for _ in range(feature_count):
            _paint_feature(quad, rng)
        ii, jj = np.meshgrid(np.arange(h), np.arange(h), indexing="ij")
        sym = np.where(jj <= ii, quad, quad.T)
        cells = _tile_quadrant(sym)
        if cells.min() != cells.max():
            return UnitCellMask(m, cells, cell_id=seed, seed=seed)
    raise CellGenerationError(
        f"seed {seed} produced degenerate masks {MAX_GENERATION_ATTEMPTS} times"
    )


def downsample_mask(mask: UnitCellMask, factor: int = 4) -> UnitCellMask:
    """Block-majority downsampling; ties resolve to alumina (0)."""
    if factor < 1 or mask.m % factor != 0:
        raise InputError(f"factor {factor} does not divide m={mask.m}")
    mo = mask.m // factor
    air = mask.cells.reshape(mo, factor, mo, factor).sum(axis=(1, 3), dtype=np.int64)
    out = (2 * air > factor * factor).astype(np.uint8)
    return UnitCellMask(mo, out, cell_id=mask.cell_id, seed=mask.seed)


def mask_to_text(mask: UnitCellMask) -> str:
    """Rows of '0'/'1' characters, one line per i index."""
    return "\n".join("".join(str(int(v)) for v in row) for row in mask.cells) + "\n"


def mask_from_text(text: str, *, cell_id: int = 0, seed: int = 0) -> UnitCellMask:
    rows = [line for line in text.strip().splitlines() if line]
    m = len(rows)
    if any(len(r) != m for r in rows):
        raise InputError("mask text is not square")
    cells = np.array([[int(ch) for ch in row] for row in rows], dtype=np.uint8)
    return UnitCellMask(m, cells, cell_id=cell_id, seed=seed)


def _require_even(m: int) -> None:
    if m < 2 or m % 2 != 0:
        raise InputError(f"m must be even and >= 2, got {m}")


def _tile_quadrant(quad: np.ndarray) -> np.ndarray:
    """Mirror an h x h quadrant into the full 2h x 2h cell."""
    h = quad.shape[0]
    full = np.empty((2 * h, 2 * h), dtype=np.uint8)
    full[:h, :h] = quad
    full[h:, :h] = quad[::-1, :]
    full[:h, h:] = quad[:, ::-1]
    full[h:, h:] = quad[::-1, ::-1]
    return full


def _paint_feature(quad: np.ndarray, rng: np.random.Generator) -> None:
    """Paint one air feature (rectangle or disk) in place; covers >= 1 pixel."""
    h = quad.shape[0]
    if rng.random() < 0.5:
        i0, j0 = rng.integers(0, h, size=2)
        wi, wj = rng.integers(1, max(2, h // 2) + 1, size=2)
        quad[i0 : i0 + wi, j0 : j0 + wj] = 1
    else:
        ci, cj = rng.integers(0, h, size=2)
        radius = rng.uniform(1.0, max(1.5, h / 3.0))
        ii, jj = np.meshgrid(np.arange(h), np.arange(h), indexing="ij")
        quad[(ii - ci) ** 2 + (jj - cj) ** 2 <= radius**2] = 1
