"""Band-structure engine for 2D photonic crystals on square lattices."""

from .bandsweep import BandSurface, DatasetRecord, band_surfaces, sweep
from .blochfem import (
    EPS_ALUMINA,
    EPS_AIR,
    BlochPencil,
    CellOperator,
    KGrid,
    LatticeSpec,
    ModeCoefficients,
    assemble,
    build_kgrid,
    element_matrices,
    mode_coefficients,
    permittivity,
)
from .cells import (
    UnitCellMask,
    downsample_mask,
    generate_p4m_cell,
    mask_from_text,
    mask_to_text,
    unfold_fundamental_domain,
    validate_p4m,
    wedge_indices,
)
from .datasets import (
    PcbdMeta,
    SplitManifest,
    make_split,
    normalization_stats,
    read_pcbd,
    write_pcbd,
)
from .eigensolve import (
    EigResult,
    ShiftInvertOperator,
    dense_reference,
    shift_invert_apply,
    solve_lowest,
)
from .metrics import MetricReport, bilinear_upsample, mre, mse_loss

__version__ = "0.1.0"

__all__ = [
    "BandSurface",
    "BlochPencil",
    "CellOperator",
    "DatasetRecord",
    "EPS_ALUMINA",
    "EPS_AIR",
    "EigResult",
    "KGrid",
    "LatticeSpec",
    "MetricReport",
    "ModeCoefficients",
    "PcbdMeta",
    "ShiftInvertOperator",
    "SplitManifest",
    "UnitCellMask",
    "assemble",
    "band_surfaces",
    "bilinear_upsample",
    "build_kgrid",
    "dense_reference",
    "downsample_mask",
    "element_matrices",
    "generate_p4m_cell",
    "make_split",
    "mask_from_text",
    "mask_to_text",
    "mode_coefficients",
    "mre",
    "mse_loss",
    "normalization_stats",
    "permittivity",
    "read_pcbd",
    "shift_invert_apply",
    "solve_lowest",
    "sweep",
    "unfold_fundamental_domain",
    "validate_p4m",
    "wedge_indices",
    "write_pcbd",
]
