"""Standalone reader for the PCBD band-dataset container and its sidecars.

This package talks to the band engine only through its published file
formats, so the v1 layout is parsed here from scratch (little-endian):

    magic "PCBD" | u32 version=1 | u32 m_cell | u32 L | u32 n_res |
    u32[n_res] resolutions ascending | u8 mode (0=TE,1=TM) | u8[3] pad |
    u64 n_records
    per record: u64 cell_id | m_cell^2 mask bytes | per resolution r
        ascending, per band n=1..L: r^2 float32 row-major (p = k_x row)
    trailing u32 CRC32 of all preceding bytes

Split manifests are JSON files with train/val/test cell-id lists and
the global (omega_min, omega_max) normalization of the train split.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass

import numpy as np

MAGIC = b"PCBD"
CODE_TO_MODE = {0: "TE", 1: "TM"}


class PcbdReadError(RuntimeError):
    pass


@dataclass(frozen=True)
class Record:
    cell_id: int
    mask: np.ndarray                 # (m_cell, m_cell) uint8
    surfaces: dict[int, np.ndarray]  # resolution -> (L, r, r) float32


@dataclass(frozen=True)
class Dataset:
    m_cell: int
    L: int
    resolutions: tuple[int, ...]
    mode: str
    records: list[Record]


def read_pcbd(path: str) -> Dataset:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise PcbdReadError(f"{path}: bad magic")
    off = 4

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(raw):
            raise PcbdReadError(f"{path}: truncated at offset {off}")
        out = struct.unpack_from(fmt, raw, off)
        off += size
        return out

    version, m_cell, L, n_res = take("<IIII")
    if version != 1:
        raise PcbdReadError(f"{path}: unsupported version {version}")
    resolutions = take(f"<{n_res}I")
    mode_code, n_records = take("<B3xQ")
    if mode_code not in CODE_TO_MODE:
        raise PcbdReadError(f"{path}: unknown mode {mode_code}")

    records = []
    for _ in range(n_records):
        (cell_id,) = take("<Q")
        mask_n = m_cell * m_cell
        if off + mask_n > len(raw):
            raise PcbdReadError(f"{path}: truncated mask")
        mask = np.frombuffer(raw, np.uint8, mask_n, off).reshape(m_cell, m_cell)
        off += mask_n
        surfaces = {}
        for r in resolutions:
            count = L * r * r
            if off + 4 * count > len(raw):
                raise PcbdReadError(f"{path}: truncated surface")
            omega = np.frombuffer(raw, "<f4", count, off).reshape(L, r, r)
            off += 4 * count
            surfaces[int(r)] = omega.copy()
        records.append(Record(cell_id, mask.copy(), surfaces))

    (crc,) = take("<I")
    if off != len(raw):
        raise PcbdReadError(f"{path}: {len(raw) - off} trailing bytes")
    if zlib.crc32(raw[:-4]) & 0xFFFFFFFF != crc:
        raise PcbdReadError(f"{path}: CRC mismatch")
    return Dataset(m_cell, L, tuple(int(r) for r in resolutions),
                   CODE_TO_MODE[mode_code], records)


@dataclass
class SplitManifest:
    seed: int
    train: list[int]
    val: list[int]
    test: list[int]
    omega_min: float
    omega_max: float

    @classmethod
    def load(cls, path: str) -> "SplitManifest":
        with open(path) as fh:
            payload = json.load(fh)
        norm = payload.get("normalization")
        if norm is None:
            raise PcbdReadError(f"{path}: manifest lacks normalization stats")
        return cls(
            seed=payload["seed"],
            train=list(payload["train"]),
            val=list(payload["val"]),
            test=list(payload["test"]),
            omega_min=float(norm["omega_min"]),
            omega_max=float(norm["omega_max"]),
        )

    def ids(self, split: str) -> list[int]:
        if split not in ("train", "val", "test"):
            raise ValueError(f"unknown split {split!r}")
        return getattr(self, split)
