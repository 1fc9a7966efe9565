from __future__ import annotations

import numpy as np
import pytest

from obci import MonteCarloCriticalValues
from obci.experiments import default_cv_source


@pytest.fixture(scope="session")
def cv_source() -> MonteCarloCriticalValues:
    """Shared cached critical-value source so expensive draws happen once."""
    return default_cv_source()


class StubCriticalValues:
    """Fixed critical value, for tests that exercise interval plumbing only."""

    def __init__(self, value: float = 1.96):
        self.value = value

    def critical_value(self, method, asym, q):
        return self.value


@pytest.fixture
def stub_cv() -> StubCriticalValues:
    return StubCriticalValues()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(171717)
