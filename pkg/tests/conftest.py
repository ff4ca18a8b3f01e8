import numpy as np
import pytest

from ecids.model import ModelConfig, init
from ecids.simulator import SimulationConfig, simulate


@pytest.fixture(scope="session")
def short_day():
    """Three simulated hours, enough for windowing and training smoke."""
    return simulate(SimulationConfig(duration_h=3.0, seed=11))


@pytest.fixture(scope="session")
def full_day():
    """One full simulated day at the default step (8,640 frames)."""
    return simulate(SimulationConfig(seed=7))


@pytest.fixture()
def tiny_model_config():
    return ModelConfig(d=2, T=3, encoder_units=(4, 3), decoder_units=(3, 4))


@pytest.fixture()
def tiny_params(tiny_model_config):
    return init(tiny_model_config, seed=1, dtype=np.float64)
