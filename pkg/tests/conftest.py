import numpy as np
import pytest

from phcbands import CellOperator, UnitCellMask, generate_p4m_cell


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture
def air_mask16():
    return UnitCellMask(16, np.ones((16, 16), np.uint8))


@pytest.fixture
def alumina_mask16():
    """All-alumina cell; degenerate on purpose, fine for operator tests."""
    return UnitCellMask(16, np.zeros((16, 16), np.uint8))


@pytest.fixture
def p4m_mask16():
    return generate_p4m_cell(seed=11, m=16, feature_count=3)


@pytest.fixture
def te_operator(p4m_mask16):
    return CellOperator(p4m_mask16, "TE")
