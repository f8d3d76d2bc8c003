"""Run configuration: a flat sectioned key-value file plus shipped presets.

The format is INI as read by :mod:`configparser`; keys carry explicit
units where a quantity has one.  ``parse -> serialize -> parse`` is the
identity on the typed configuration.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field, fields, replace
from importlib import resources

import numpy as np

from .column import DEFAULT_INJECTION_DURATION_S, ColumnConfig, ChromatographyModel
from .errors import ConfigError
from .models import GammaMixtureModel, GaussianMixtureModel, uniform_grid
from .optim import GdSettings
from .reparam import KINDS, SORT_RULES, ReparamMap
from .samplers import SAMPLER_KINDS, SamplerOptions
from .types import Hyperparameters

PRESETS = ("case1", "case2", "case3", "chroma")


@dataclass(frozen=True)
class RunConfig:
    """Typed view of one experiment configuration."""

    name: str = "run"
    # model
    model_kind: str = "gaussian_mixture"  # gaussian_mixture | gamma_mixture | chroma
    components: int = 2
    window_start: float = -2.0
    window_end: float = 7.0
    grid_start: float | None = None  # default: the window bounds
    grid_end: float | None = None
    n_points: int = 50
    # truth / synthesis
    xi_star: tuple[float, ...] = (1.0 / 3.0, 2.0 / 3.0, 8.0 / 3.0, 4.0 / 3.0)
    noise_variance: float = 1e-3
    data_seed: int = 20260809
    # reparameterization
    reparam_kind: str = "weight_sum"
    # prior
    alpha: float = 2.0
    beta: float | None = None  # None = squared initial loss / n
    gamma: float = 8.0
    # proposals (per eta coordinate; per xi coordinate for the plain sampler)
    eta_proposal_sd: tuple[float, ...] = (0.02,)
    eta_proposal_sd_mgdg: tuple[float, ...] | None = None
    eta_proposal_sd_malg: tuple[float, ...] | None = None
    xi_proposal_sd: tuple[float, ...] = (0.05,)
    sigma2_proposal_sd: float = 0.1
    # Langevin sub-chain
    tau: float = 1e-3
    langevin_steps: int = 200
    unconstrained: bool = False
    # run lengths
    sampler: str = "mgdg"
    chain_length: int = 10_000
    burn_in: int = 500
    init_candidates: int = 1000
    sort_rule: str = "swap_smaller_first"
    seed: int = 1
    # restoration descent
    gd_step: float = 0.1
    gd_max_iter: int = 500
    gd_init_max_iter: int | None = None
    nu_init_default: tuple[float, ...] | None = None
    # column block (chroma only)
    column_u_cm_s: float = 0.125
    column_length_cm: float = 15.0
    column_phase_ratio: float = 0.7806
    column_diffusion_cm2_s: float = 0.00010417
    column_horizon_s: float = 750.0
    column_injection_mM: tuple[float, float] = (5.0, 0.0)
    column_injection_duration_s: float = DEFAULT_INJECTION_DURATION_S
    column_n_cells: int = 200
    column_cfl: float = 0.8

    def __post_init__(self):
        if self.model_kind not in ("gaussian_mixture", "gamma_mixture", "chroma"):
            raise ConfigError(f"unknown model kind {self.model_kind!r}")
        if self.reparam_kind not in KINDS:
            raise ConfigError(f"unknown reparam kind {self.reparam_kind!r}")
        if self.sampler not in SAMPLER_KINDS:
            raise ConfigError(f"unknown sampler {self.sampler!r}")
        if self.sort_rule not in SORT_RULES:
            raise ConfigError(f"unknown sort rule {self.sort_rule!r}")
        if not self.burn_in < self.chain_length:
            raise ConfigError("burn_in must be smaller than chain_length")
        if self.noise_variance < 0.0:
            raise ConfigError("noise_variance cannot be negative")
        if len(self.xi_star) != self.dimension:
            raise ConfigError(
                f"xi_star has {len(self.xi_star)} entries, model needs {self.dimension}"
            )
        if self.window_end <= self.window_start:
            raise ConfigError("empty recording window")
        lo, hi = self.grid_bounds
        if hi <= lo or lo < self.window_start or hi > self.window_end:
            raise ConfigError("grid bounds must be ordered and inside the window")

    # ---- derived objects -------------------------------------------------

    @property
    def dimension(self) -> int:
        if self.model_kind == "gaussian_mixture":
            return 2 * self.components
        if self.model_kind == "gamma_mixture":
            return 4
        return 4 if self.components == 1 else 8

    @property
    def window(self) -> tuple[float, float]:
        return (self.window_start, self.window_end)

    @property
    def grid_bounds(self) -> tuple[float, float]:
        lo = self.window_start if self.grid_start is None else self.grid_start
        hi = self.window_end if self.grid_end is None else self.grid_end
        return (lo, hi)

    def grid(self) -> np.ndarray:
        lo, hi = self.grid_bounds
        return uniform_grid(lo, hi, self.n_points)

    def build_model(self):
        grid = self.grid()
        if self.model_kind == "gaussian_mixture":
            return GaussianMixtureModel(self.components, grid)
        if self.model_kind == "gamma_mixture":
            return GammaMixtureModel(grid)
        return ChromatographyModel(self.column_config(), grid, self.dimension)

    def column_config(self) -> ColumnConfig:
        return ColumnConfig(
            u_cm_s=self.column_u_cm_s,
            length_cm=self.column_length_cm,
            phase_ratio=self.column_phase_ratio,
            diffusion_cm2_s=self.column_diffusion_cm2_s,
            horizon_s=self.column_horizon_s,
            injection_mM=self.column_injection_mM,
            injection_duration_s=self.column_injection_duration_s,
            n_cells=self.column_n_cells,
            cfl=self.column_cfl,
        )

    def reparam(self) -> ReparamMap:
        return ReparamMap(self.reparam_kind, self.dimension)

    def hyperparameters(self, sampler: str | None = None) -> Hyperparameters:
        sampler = sampler or self.sampler
        if sampler == "mwg":
            sd = self.xi_proposal_sd
        elif sampler == "mgdg" and self.eta_proposal_sd_mgdg is not None:
            sd = self.eta_proposal_sd_mgdg
        elif sampler == "malg" and self.eta_proposal_sd_malg is not None:
            sd = self.eta_proposal_sd_malg
        else:
            sd = self.eta_proposal_sd
        return Hyperparameters(
            alpha=self.alpha,
            beta=self.beta,
            gamma=self.gamma,
            proposal_sd=np.asarray(sd, dtype=float),
            tau=self.tau,
            m=self.langevin_steps,
            burn_in=self.burn_in,
            chain_length=self.chain_length,
            init_candidates=self.init_candidates,
            sort_rule=self.sort_rule,
        )

    def sampler_options(self) -> SamplerOptions:
        return SamplerOptions(
            sigma2_proposal_sd=self.sigma2_proposal_sd,
            unconstrained=self.unconstrained,
            gd=GdSettings(step=self.gd_step, max_iter=self.gd_max_iter),
            init_gd_max_iter=self.gd_init_max_iter,
            nu_init_default=self.nu_init_default,
        )

    def with_overrides(self, **kwargs) -> "RunConfig":
        return replace(self, **kwargs)


# ---------------------------------------------------------------------------
# serialization

_SECTIONS = {
    "run": ("name", "sampler", "seed", "chain_length", "burn_in",
            "init_candidates", "sort_rule"),
    "model": ("model_kind", "components", "window_start", "window_end",
              "grid_start", "grid_end", "n_points"),
    "truth": ("xi_star", "noise_variance", "data_seed"),
    "reparam": ("reparam_kind", "nu_init_default"),
    "prior": ("alpha", "beta", "gamma"),
    "proposal": ("eta_proposal_sd", "eta_proposal_sd_mgdg", "eta_proposal_sd_malg",
                 "xi_proposal_sd", "sigma2_proposal_sd"),
    "langevin": ("tau", "langevin_steps", "unconstrained"),
    "gd": ("gd_step", "gd_max_iter", "gd_init_max_iter"),
    "column": ("column_u_cm_s", "column_length_cm", "column_phase_ratio",
               "column_diffusion_cm2_s", "column_horizon_s", "column_injection_mM",
               "column_injection_duration_s", "column_n_cells", "column_cfl"),
}

_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(name: str, raw: str):
    raw = raw.strip()
    kind = _FIELD_TYPES[name]
    if raw.lower() == "none" and "None" in kind:
        return None
    if "tuple" in kind:
        if not raw:
            return ()
        return tuple(float(v) for v in raw.split(","))
    if kind == "bool":
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"cannot read boolean {name} = {raw!r}")
    if kind == "int" or kind == "int | None":
        return int(raw)
    if kind == "float" or kind == "float | None":
        return float(raw)
    return raw


def serialize_config(config: RunConfig) -> str:
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep unit suffixes like mM case-intact
    for section, names in _SECTIONS.items():
        parser[section] = {name: _format_value(getattr(config, name)) for name in names}
    out = io.StringIO()
    parser.write(out)
    return out.getvalue()


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep unit suffixes like mM case-intact
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from exc
    values = {}
    known = {name: section for section, names in _SECTIONS.items() for name in names}
    for section in parser.sections():
        for key, raw in parser[section].items():
            if key not in known:
                raise ConfigError(f"unknown configuration key {key!r}")
            if known[key] != section:
                raise ConfigError(f"key {key!r} belongs in section [{known[key]}]")
            values[key] = _parse_value(key, raw)
    try:
        config = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return config


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_config(handle.read())


def save_config(config: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(serialize_config(config))


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(serialize_config(config).encode()).hexdigest()


def load_preset(name: str) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose one of {PRESETS}")
    text = resources.files("isofit.presets").joinpath(f"{name}.ini").read_text()
    return parse_config(text)
