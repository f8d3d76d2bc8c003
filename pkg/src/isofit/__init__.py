"""Bayesian estimation of adsorption-isotherm and mixture-model parameters.

The package pairs closed-form mixture surrogates and a fixed-bed column
solver with three Gibbs-style samplers (plain Metropolis-within-Gibbs, a
gradient-descent-embedded variant, and a Langevin-dynamics variant) over
an explicit joint posterior, plus chain diagnostics and a batch CLI.
"""

__version__ = "0.1.0"

from .column import ChromatographyModel, ColumnConfig, IsothermParams
from .config import RunConfig, load_config, load_preset, save_config
from .models import GammaMixtureModel, GaussianMixtureModel
from .optim import GdSettings, gradient_descent, numerical_gradient
from .posterior import PosteriorContext
from .reparam import ReparamMap, apply_sort_rule, from_unconstrained, to_unconstrained
from .samplers import SamplerOptions, run_malg, run_mgdg, run_mwg, run_sampler
from .types import Chain, ChainRecord, Hyperparameters, Observation

__all__ = [
    "Chain",
    "ChainRecord",
    "ChromatographyModel",
    "ColumnConfig",
    "GammaMixtureModel",
    "GaussianMixtureModel",
    "GdSettings",
    "Hyperparameters",
    "IsothermParams",
    "Observation",
    "PosteriorContext",
    "ReparamMap",
    "RunConfig",
    "SamplerOptions",
    "apply_sort_rule",
    "from_unconstrained",
    "gradient_descent",
    "load_config",
    "load_preset",
    "numerical_gradient",
    "run_malg",
    "run_mgdg",
    "run_mwg",
    "run_sampler",
    "save_config",
    "to_unconstrained",
]
