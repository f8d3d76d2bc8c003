"""Shared value types: observations, hyperparameters, chain records."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatch, DomainViolation
from .reparam import SORT_RULES


@dataclass(frozen=True)
class Observation:
    """A recorded response: strictly increasing times and noisy values."""

    times: np.ndarray
    values: np.ndarray
    window: tuple[float, float]

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape:
            raise DimensionMismatch("times and values must be 1-d and equal length")
        if times.size and (np.any(np.diff(times) <= 0.0)):
            raise DomainViolation("times must be strictly increasing")
        lo, hi = self.window
        if times.size and (times[0] < lo or times[-1] > hi):
            raise DomainViolation("times must lie inside the recording window")
        if not np.all(np.isfinite(values)):
            raise DomainViolation("observation values must be finite")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.times.size


@dataclass(frozen=True)
class Hyperparameters:
    """Prior, proposal and run-length settings for one sampling run.

    ``beta = None`` means "compute at run time" as the squared loss of the
    initial restored parameter divided by n, which is how the experiment
    presets define it.
    """

    alpha: float = 2.0
    beta: float | None = None
    gamma: float = 8.0
    proposal_sd: np.ndarray = field(default_factory=lambda: np.array([0.02]))
    tau: float = 1e-3
    m: int = 200
    burn_in: int = 500
    chain_length: int = 10_000
    init_candidates: int = 1000
    sort_rule: str = "none"

    def __post_init__(self):
        object.__setattr__(
            self, "proposal_sd", np.atleast_1d(np.asarray(self.proposal_sd, dtype=float))
        )
        if self.alpha <= 0.0 or (self.beta is not None and self.beta <= 0.0):
            raise DomainViolation("alpha and beta must be positive")
        if self.gamma < 0.0:
            raise DomainViolation("gamma must be non-negative")
        if np.any(self.proposal_sd <= 0.0):
            raise DomainViolation("proposal standard deviations must be positive")
        if self.tau <= 0.0 or self.m < 1:
            raise DomainViolation("tau must be positive and m a positive integer")
        if self.chain_length < 1 or self.burn_in < 0 or self.burn_in >= self.chain_length:
            raise DomainViolation("need 0 <= burn_in < chain_length")
        if self.init_candidates < 1:
            raise DomainViolation("init_candidates must be at least 1")
        if self.sort_rule not in SORT_RULES:
            raise DomainViolation(f"unknown sort rule {self.sort_rule!r}")

    def with_beta(self, beta: float) -> "Hyperparameters":
        return replace(self, beta=float(beta))


@dataclass(frozen=True)
class ChainRecord:
    """One posterior draw: reduced coordinates, restored xi, noise variance."""

    eta: np.ndarray
    nu: np.ndarray
    xi_hat: np.ndarray
    sigma2: float
    loss: float
    accepted: dict[str, float]

    def __post_init__(self):
        if self.sigma2 <= 0.0:
            raise DomainViolation("sigma2 must be positive")
        if self.loss < 0.0:
            raise DomainViolation("loss is a norm and cannot be negative")


class Chain:
    """A completed run: per-iteration draws stored as columns.

    ``accepted`` holds one column per Metropolis block; for blocks with
    several inner proposals per iteration (the Langevin sub-chain) the
    entry is the accepted fraction instead of a 0/1 flag.
    """

    def __init__(
        self,
        eta: np.ndarray,
        nu: np.ndarray,
        xi: np.ndarray,
        sigma2: np.ndarray,
        loss: np.ndarray,
        accepted: np.ndarray,
        block_names: tuple[str, ...],
        burn_in: int,
        seed: int,
        meta: dict | None = None,
    ):
        self.eta = np.asarray(eta, dtype=float)
        self.nu = np.asarray(nu, dtype=float)
        self.xi = np.asarray(xi, dtype=float)
        self.sigma2 = np.asarray(sigma2, dtype=float)
        self.loss = np.asarray(loss, dtype=float)
        self.accepted = np.asarray(accepted, dtype=float)
        self.block_names = tuple(block_names)
        self.burn_in = int(burn_in)
        self.seed = int(seed)
        self.meta = dict(meta or {})
        k = self.sigma2.size
        if not (len(self.eta) == len(self.nu) == len(self.xi) == len(self.loss) == k):
            raise DimensionMismatch("chain columns disagree on length")
        if self.accepted.shape != (k, len(self.block_names)):
            raise DimensionMismatch("accepted flags must be (K, n_blocks)")
        # the container may hold an exhausted chain; consumers that need
        # post-burn-in records raise EmptyChain instead
        if not 0 <= self.burn_in <= k:
            raise DomainViolation("need 0 <= burn_in <= chain length")

    def __len__(self) -> int:
        return self.sigma2.size

    def __getitem__(self, k: int) -> ChainRecord:
        return ChainRecord(
            eta=self.eta[k].copy(),
            nu=self.nu[k].copy(),
            xi_hat=self.xi[k].copy(),
            sigma2=float(self.sigma2[k]),
            loss=float(self.loss[k]),
            accepted=dict(zip(self.block_names, self.accepted[k])),
        )

    def kept(self) -> "Chain":
        """The post-burn-in portion, as a chain with burn_in = 0."""
        b = self.burn_in
        return Chain(
            self.eta[b:], self.nu[b:], self.xi[b:], self.sigma2[b:],
            self.loss[b:], self.accepted[b:], self.block_names, 0, self.seed,
            self.meta,
        )
