import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import epirenew  # noqa: F401  (enables 64-bit jax before any test imports jax.numpy)

settings.register_profile(
    "epirenew", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("epirenew")


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)
