from __future__ import annotations

import numpy as np
import pytest

from vectile.catalog import Catalog
from vectile.geometry import BoundingBox
from vectile.synth import uniform_points


@pytest.fixture
def catalog(tmp_path):
    return Catalog(tmp_path / "data")


@pytest.fixture(scope="session")
def small_points():
    return uniform_points(5_000, seed=42)


@pytest.fixture(scope="session")
def tight_box():
    # A small region so low-zoom tiles still carry dense data.
    return BoundingBox(-2e6, -2e6, 2e6, 2e6)


def assert_grids_equal(a, b):
    np.testing.assert_array_equal(a.codes, b.codes)
    np.testing.assert_array_equal(a.fill, b.fill)
