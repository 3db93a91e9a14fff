import numpy as np
import pytest

from radio_twin.physio import generate_cohort


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_cohort(tmp_path_factory):
    """Four 30 s subjects on disk; cheap enough for CLI and pipeline tests."""
    root = tmp_path_factory.mktemp("cohort") / "ds"
    generate_cohort(root, 4, 30.0, seed=7)
    return root
