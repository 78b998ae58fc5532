"""Semi-mechanistic Bayesian renewal models for epidemic data."""

import os

_threads = os.environ.get("EPIRENEW_NUM_THREADS")
if _threads and "XLA_FLAGS" not in os.environ:
    os.environ["XLA_FLAGS"] = (
        f"--xla_cpu_multi_thread_eigen={'true' if int(_threads) > 1 else 'false'} "
        f"intra_op_parallelism_threads={int(_threads)}"
    )

import jax  # noqa: E402

jax.config.update("jax_enable_x64", True)

from .data import GapWarning, IngestError, RegionSeries, ingest  # noqa: E402
from .distributions import (  # noqa: E402
    ContinuousLagDensity,
    DiscretePmf,
    MomentMatchedPrior,
    TruncationWarning,
    discretize,
    match_moments,
)
from .observation import (  # noqa: E402
    ObservationType,
    ObservedSeries,
    expected_observations,
    log_likelihood,
    simulate_observations,
)
from .regression import (  # noqa: E402
    LinkFunction,
    NormalPrior,
    PoolingPrior,
    RandomWalk,
    RegressionSpec,
    ShrinkagePrior,
    build_design,
    inverse_link,
)
from .renewal import (  # noqa: E402
    InfectionPath,
    SeedingConfig,
    adjust_population,
    case_load,
    propagate_expected,
    propagate_latent,
)

__version__ = "0.1.0"

__all__ = [
    "ContinuousLagDensity",
    "DiscretePmf",
    "GapWarning",
    "InfectionPath",
    "IngestError",
    "LinkFunction",
    "MomentMatchedPrior",
    "NormalPrior",
    "ObservationType",
    "ObservedSeries",
    "PoolingPrior",
    "RandomWalk",
    "RegionSeries",
    "RegressionSpec",
    "SeedingConfig",
    "ShrinkagePrior",
    "TruncationWarning",
    "adjust_population",
    "build_design",
    "case_load",
    "discretize",
    "expected_observations",
    "ingest",
    "inverse_link",
    "log_likelihood",
    "match_moments",
    "propagate_expected",
    "propagate_latent",
    "simulate_observations",
]
