import numpy as np
import pytest

from isofit.config import load_preset
from isofit.posterior import PosteriorContext
from isofit.runner import synthesize_observation
from isofit.types import Hyperparameters, Observation


@pytest.fixture(scope="session")
def case1_config():
    return load_preset("case1")


@pytest.fixture(scope="session")
def case1_context(case1_config):
    obs, _ = synthesize_observation(case1_config)
    return PosteriorContext(
        model=case1_config.build_model(),
        reparam=case1_config.reparam(),
        observation=obs,
        psi=case1_config.hyperparameters().with_beta(1e-3),
    )


@pytest.fixture(scope="session")
def case1_clean_context(case1_config):
    """Noise-free Case 1 observation at the configured truth."""
    config = case1_config.with_overrides(noise_variance=0.0)
    obs, _ = synthesize_observation(config)
    return PosteriorContext(
        model=config.build_model(),
        reparam=config.reparam(),
        observation=obs,
        psi=config.hyperparameters().with_beta(1e-3),
    )


def make_observation(times, values, window=None):
    times = np.asarray(times, dtype=float)
    if window is None:
        window = (float(times[0]), float(times[-1]))
    return Observation(times, np.asarray(values, dtype=float), window)


@pytest.fixture
def small_psi():
    return Hyperparameters(
        alpha=2.0, beta=1e-3, gamma=0.0, proposal_sd=np.array([0.05]),
        tau=1e-3, m=5, burn_in=10, chain_length=100, init_candidates=4,
        sort_rule="none",
    )
