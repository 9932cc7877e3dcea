"""PCBD container serialization, split manifests, and normalization stats.

PCBD v1 layout (little-endian throughout):

    magic "PCBD" (4B) | u32 version=1 | u32 m_cell | u32 L | u32 n_res |
    u32[n_res] resolutions ascending | u8 mode (0=TE, 1=TM) | u8[3] pad |
    u64 n_records
    per record: u64 cell_id | m_cell^2 mask bytes (row-major, 0/1) |
        for each resolution r ascending, for band n = 1..L:
            r^2 float32 values row-major with p (k_x index) as the row
    trailing u32 CRC32 of all preceding bytes

The constant n/L band channel is never stored; consumers derive it.
Every surface in a file was computed on the pixel mesh of the stored
mask, i.e. mesh_m == m_cell; sidecar JSON manifests repeat this for
auditability. Files are written once (atomically) and read concurrently.
"""

from __future__ import annotations

import json
import os
import struct
import warnings
import zlib
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .bandsweep import BandSurface, DatasetRecord
from .cells import UnitCellMask
from .errors import (
    InputError,
    PcbdChecksumError,
    PcbdMagicError,
    PcbdTruncationError,
    PcbdVersionError,
)

MAGIC = b"PCBD"
VERSION = 1
SPLIT_FRACTIONS = (0.8, 0.1, 0.1)

_MODE_TO_CODE = {"TE": 0, "TM": 1}
_CODE_TO_MODE = {v: k for k, v in _MODE_TO_CODE.items()}


@dataclass(frozen=True)
class PcbdMeta:
    """Homogeneous metadata shared by all records of one file."""

    m_cell: int
    L: int
    resolutions: tuple[int, ...]
    mode: str

    def __post_init__(self):
        if self.mode not in _MODE_TO_CODE:
            raise InputError(f"mode must be TE or TM, got {self.mode!r}")
        res = tuple(int(r) for r in self.resolutions)
        if not res or list(res) != sorted(set(res)):
            raise InputError("resolutions must be non-empty, ascending, unique")
        object.__setattr__(self, "resolutions", res)

    @property
    def mesh_m(self) -> int:
        """FEM mesh resolution: always the mask pixel grid."""
        return self.m_cell


def write_pcbd(records: Sequence[DatasetRecord], path: str, meta: PcbdMeta) -> int:
    """Serialize records; returns bytes written. Write is atomic (tmp+rename)."""
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<IIII", VERSION, meta.m_cell, meta.L, len(meta.resolutions))
    buf += struct.pack(f"<{len(meta.resolutions)}I", *meta.resolutions)
    buf += struct.pack("<B3xQ", _MODE_TO_CODE[meta.mode], len(records))
    for rec in records:
        if rec.mask.m != meta.m_cell:
            raise InputError(
                f"record {rec.cell_id} mask resolution {rec.mask.m} != meta {meta.m_cell}"
            )
        if sorted(rec.surfaces) != list(meta.resolutions):
            raise InputError(
                f"record {rec.cell_id} resolutions {sorted(rec.surfaces)} "
                f"!= meta {list(meta.resolutions)}"
            )
        buf += struct.pack("<Q", rec.cell_id)
        buf += rec.mask.cells.tobytes(order="C")
        for res in meta.resolutions:
            surf = rec.surfaces[res]
            if surf.L != meta.L:
                raise InputError(f"record {rec.cell_id} band count {surf.L} != {meta.L}")
            buf += surf.omega.astype("<f4", copy=False).tobytes(order="C")
    buf += struct.pack("<I", zlib.crc32(bytes(buf)) & 0xFFFFFFFF)

    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(buf)
    os.replace(tmp, path)
    return len(buf)


def read_pcbd(path: str) -> tuple[PcbdMeta, list[DatasetRecord]]:
    """Parse a PCBD file; every malformation raises a distinct error kind."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise PcbdMagicError(f"{path}: not a PCBD file")
    cursor = _Cursor(raw, offset=4)
    version, m_cell, L, n_res = cursor.unpack("<IIII")
    if version != VERSION:
        raise PcbdVersionError(f"{path}: unsupported version {version}")
    resolutions = cursor.unpack(f"<{n_res}I")
    mode_code, n_records = cursor.unpack("<B3xQ")
    if mode_code not in _CODE_TO_MODE:
        raise PcbdVersionError(f"{path}: unknown mode code {mode_code}")
    meta = PcbdMeta(m_cell, L, tuple(resolutions), _CODE_TO_MODE[mode_code])

    records = []
    for _ in range(n_records):
        (cell_id,) = cursor.unpack("<Q")
        mask_bytes = cursor.take(m_cell * m_cell)
        cells = np.frombuffer(mask_bytes, dtype=np.uint8).reshape(m_cell, m_cell)
        if cells.max(initial=0) > 1:
            raise PcbdChecksumError(f"{path}: mask bytes out of range")
        mask = UnitCellMask(m_cell, cells.copy(), cell_id=cell_id)
        surfaces = {}
        for res in meta.resolutions:
            data = cursor.take(L * res * res * 4)
            omega = np.frombuffer(data, dtype="<f4").reshape(L, res, res).copy()
            surfaces[res] = BandSurface(L, res, omega, meta.mode, cell_id)
        records.append(DatasetRecord(cell_id, mask, surfaces))

    (stored_crc,) = cursor.unpack("<I")
    if cursor.remaining() != 0:
        raise PcbdTruncationError(f"{path}: {cursor.remaining()} trailing bytes")
    actual = zlib.crc32(raw[:-4]) & 0xFFFFFFFF
    if actual != stored_crc:
        raise PcbdChecksumError(
            f"{path}: CRC mismatch (stored {stored_crc:#010x}, actual {actual:#010x})"
        )
    return meta, records


class _Cursor:
    """Bounds-checked reader over immutable bytes."""

    def __init__(self, raw: bytes, offset: int = 0):
        self.raw = raw
        self.offset = offset

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.raw):
            raise PcbdTruncationError(
                f"file truncated: needed {n} bytes at offset {self.offset}, "
                f"have {len(self.raw) - self.offset}"
            )
        out = self.raw[self.offset : self.offset + n]
        self.offset += n
        return out

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def remaining(self) -> int:
        return len(self.raw) - self.offset


@dataclass
class SplitManifest:
    """Deterministic 80/10/10 split with train-split normalization stats."""

    seed: int
    train: list[int]
    val: list[int]
    test: list[int]
    fractions: tuple[float, float, float] = SPLIT_FRACTIONS
    normalization: tuple[float, float] | None = None  # (omega_min, omega_max)

    def split_ids(self, name: str) -> list[int]:
        if name not in ("train", "val", "test"):
            raise InputError(f"unknown split {name!r}")
        return getattr(self, name)

    def to_json(self) -> str:
        payload = {
            "seed": self.seed,
            "fractions": list(self.fractions),
            "train": [int(c) for c in self.train],
            "val": [int(c) for c in self.val],
            "test": [int(c) for c in self.test],
            "normalization": (
                None
                if self.normalization is None
                else {
                    "omega_min": self.normalization[0],
                    "omega_max": self.normalization[1],
                }
            ),
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SplitManifest":
        payload = json.loads(text)
        norm = payload.get("normalization")
        return cls(
            seed=payload["seed"],
            train=list(payload["train"]),
            val=list(payload["val"]),
            test=list(payload["test"]),
            fractions=tuple(payload.get("fractions", SPLIT_FRACTIONS)),
            normalization=(
                None if norm is None else (norm["omega_min"], norm["omega_max"])
            ),
        )

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")

    @classmethod
    def load(cls, path: str) -> "SplitManifest":
        with open(path) as fh:
            return cls.from_json(fh.read())


def make_split(cell_ids: Sequence[int], seed: int) -> SplitManifest:
    """Shuffle-and-cut split; a pure function of (cell_ids, seed)."""
    ids = [int(c) for c in cell_ids]
    n = len(ids)
    if n < 10:
        raise InputError(f"need at least 10 cells to split, got {n}")
    if len(set(ids)) != n:
        raise InputError("cell_ids contain duplicates")
    order = np.random.default_rng(seed).permutation(n)
    shuffled = [ids[i] for i in order]
    n_train = round(SPLIT_FRACTIONS[0] * n)
    n_val = round(SPLIT_FRACTIONS[1] * n)
    return SplitManifest(
        seed=seed,
        train=shuffled[:n_train],
        val=shuffled[n_train : n_train + n_val],
        test=shuffled[n_train + n_val :],
    )


def normalization_stats(
    records: Iterable[DatasetRecord], split: SplitManifest | Sequence[int]
) -> tuple[float, float]:
    """Global (omega_min, omega_max) over all band values of the train split."""
    train_ids = set(split.train if isinstance(split, SplitManifest) else split)
    if not train_ids:
        raise InputError("train split is empty")
    omega_min, omega_max = np.inf, -np.inf
    seen = 0
    for rec in records:
        if rec.cell_id not in train_ids:
            continue
        seen += 1
        for surf in rec.surfaces.values():
            omega_min = min(omega_min, float(surf.omega.min()))
            omega_max = max(omega_max, float(surf.omega.max()))
    if seen == 0:
        raise InputError("no records belong to the train split")
    if omega_max <= omega_min:
        warnings.warn(
            f"degenerate normalization range [{omega_min}, {omega_max}]",
            RuntimeWarning,
            stacklevel=2,
        )
    return omega_min, omega_max
