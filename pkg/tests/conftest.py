import numpy as np
import pytest

from plantattack.plant import PlantConfig, record_signal_ranges


@pytest.fixture(scope="session")
def base_config():
    return PlantConfig(seed=0)


@pytest.fixture(scope="session")
def signal_ranges(base_config):
    """Per-channel extrema over 50 attack-free runs; shared across modules."""
    return record_signal_ranges(50, base_config)
