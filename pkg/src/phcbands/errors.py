"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: InputError -> 2, ComputeError -> 3,
DataFormatError -> 4.
"""


class PhcError(Exception):
    """Base class for all package errors."""


class InputError(PhcError, ValueError):
    """Invalid argument, configuration, or domain violation."""


class ComputeError(PhcError, RuntimeError):
    """Numerical failure (non-convergence, degenerate draw, ...)."""


class CellGenerationError(ComputeError):
    """Cell generation kept producing degenerate masks."""


class AssemblyError(InputError):
    """Mesh or element geometry is unusable (e.g. zero-area triangle)."""


class EigenConvergenceError(ComputeError):
    """Eigensolver ran out of iterations/restarts.

    Carries the best residuals seen so the caller can inspect how close
    the run came.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class SingularShiftError(ComputeError):
    """Shifted operator A - sigma*B is (near-)singular; adjust sigma."""


class DataFormatError(PhcError):
    """Base class for serialized-data failures."""


class PcbdMagicError(DataFormatError):
    """File does not start with the PCBD magic."""


class PcbdVersionError(DataFormatError):
    """PCBD container version is not supported."""


class PcbdTruncationError(DataFormatError):
    """File ended before the declared payload was read."""


class PcbdChecksumError(DataFormatError):
    """Trailing CRC32 does not match the file contents."""
