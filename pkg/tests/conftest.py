import pytest

from exitlab.core import DomainSpec, SpaceSpec
from exitlab.samplers import SimConfig, run_batch


@pytest.fixture(scope="session")
def interval_batch():
    """20k Brownian paths from 0 in (-1, 1), generator (1/2) d^2/dx^2."""
    cfg = SimConfig(h=1e-4, t_max=12.0, n_paths=20_000, seed=20240611)
    return run_batch(SpaceSpec.euclidean(1), DomainSpec.interval(-1.0, 1.0), [0.0], cfg)
