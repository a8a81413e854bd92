"""
Shared fixtures: small truncations so the suite stays fast.
"""

import pytest

from levysphere.config import ModelConfig
from levysphere.spherical_spectral import make_grid


@pytest.fixture
def small_cfg() -> ModelConfig:
    """l_max = 7 on a dealiased grid, default noise modes."""
    grid = make_grid(7, dealias=True)
    return ModelConfig(l_max=7, n_lat=grid.n_lat, n_lon=grid.n_lon, dt=1e-2)


@pytest.fixture
def quiet_cfg(small_cfg: ModelConfig) -> ModelConfig:
    """Noise-free, unforced version of small_cfg."""
    return small_cfg.replace(sigma=(0.0, 0.0))
