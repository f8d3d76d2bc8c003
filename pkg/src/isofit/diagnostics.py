"""Chain post-processing: summaries, credible bands, relative errors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainViolation, EmptyChain, ZeroSignal
from .types import Chain

QUANTILE_LEVELS = (0.025, 0.25, 0.5, 0.75, 0.975)


def quantiles_sorted(x, levels=QUANTILE_LEVELS) -> np.ndarray:
    """Linear-interpolation quantiles computed from a full sort."""
    x = np.sort(np.asarray(x, dtype=float))
    return np.array([_interp_order_stat(x, q) for q in levels])


def quantiles_partition(x, levels=QUANTILE_LEVELS) -> np.ndarray:
    """Same quantile definition via partial selection, no full sort.

    Serves as the independent cross-check of :func:`quantiles_sorted`.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    out = np.empty(len(levels))
    for i, q in enumerate(levels):
        pos = q * (n - 1)
        lo = int(math.floor(pos))
        hi = min(lo + 1, n - 1)
        part = np.partition(x, (lo, hi))
        out[i] = part[lo] + (pos - lo) * (part[hi] - part[lo])
    return out


def _interp_order_stat(sorted_x: np.ndarray, q: float) -> float:
    n = sorted_x.size
    pos = q * (n - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, n - 1)
    return float(sorted_x[lo] + (pos - lo) * (sorted_x[hi] - sorted_x[lo]))


def ess_batch_means(x) -> float:
    """Effective sample count from batch means with ~sqrt(n) batches."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4:
        return float(n)
    n_batches = max(2, int(math.sqrt(n)))
    batch = n // n_batches
    trimmed = x[: batch * n_batches].reshape(n_batches, batch)
    means = trimmed.mean(axis=1)
    var_means = means.var(ddof=1)
    var_x = x.var(ddof=1)
    if var_means <= 0.0 or var_x <= 0.0:
        return float(n)
    # batch * var(batch means) estimates the long-run variance of the chain
    return float(min(n, max(1.0, n * var_x / (batch * var_means))))


@dataclass(frozen=True)
class ChainSummary:
    """Per-variable posterior summaries plus acceptance rates."""

    names: tuple[str, ...]
    mean: np.ndarray
    sd: np.ndarray
    quantiles: np.ndarray  # (n_vars, 5) at QUANTILE_LEVELS
    ess: np.ndarray
    acceptance: dict[str, float]

    def row(self, name: str) -> dict:
        i = self.names.index(name)
        entry = {"name": name, "mean": self.mean[i], "sd": self.sd[i], "ess": self.ess[i]}
        for q, v in zip(QUANTILE_LEVELS, self.quantiles[i]):
            entry[f"q{100 * q:g}"] = v
        return entry


def chain_variables(chain: Chain) -> tuple[tuple[str, ...], np.ndarray]:
    """Column names and matrix of the recorded draws."""
    d = chain.eta.shape[1]
    free = chain.nu.shape[1]
    dim = chain.xi.shape[1]
    names = (
        tuple(f"eta_{j + 1}" for j in range(d))
        + tuple(f"nu_{j + 1}" for j in range(free))
        + tuple(f"xi_{j + 1}" for j in range(dim))
        + ("sigma2", "loss")
    )
    matrix = np.column_stack(
        [chain.eta, chain.nu, chain.xi, chain.sigma2, chain.loss]
    )
    # one fixed memory layout so reductions sum in the same order no matter
    # where the chain came from (fresh run or CSV round-trip)
    return names, np.ascontiguousarray(matrix)


def summarize(chain: Chain) -> ChainSummary:
    """Post-burn-in summary of every recorded variable."""
    kept = chain.kept()
    if len(kept) == 0:
        raise EmptyChain("no post-burn-in records")
    names, matrix = chain_variables(kept)
    mean = matrix.mean(axis=0)
    sd = matrix.std(axis=0, ddof=1) if len(kept) > 1 else np.zeros(matrix.shape[1])
    quantiles = np.vstack([quantiles_sorted(col) for col in matrix.T])
    ess = np.array([ess_batch_means(col) for col in matrix.T])
    return ChainSummary(
        names=names, mean=mean, sd=sd, quantiles=quantiles, ess=ess,
        acceptance=acceptance_rates(chain),
    )


def acceptance_rates(chain: Chain) -> dict[str, float]:
    """Post-burn-in accepted fraction per Metropolis block."""
    kept = chain.kept()
    if len(kept) == 0:
        raise EmptyChain("no post-burn-in records")
    rates = kept.accepted.mean(axis=0)
    return dict(zip(kept.block_names, rates.tolist()))


def credible_band(chain: Chain, model, grid=None, level: float = 0.95):
    """Pointwise central band of the model curves along the chain.

    Returns ``(lower, upper)`` evaluated on ``grid`` (default: the model's
    own grid), using the empirical (1 +/- level)/2 quantiles of
    ``R(xi_hat, t)`` over the post-burn-in records.
    """
    if not 0.0 < level < 1.0:
        raise DomainViolation("level must lie in (0, 1)")
    kept = chain.kept()
    if len(kept) == 0:
        raise EmptyChain("no post-burn-in records")
    if grid is None:
        grid = model.grid
    grid = np.asarray(grid, dtype=float)
    curves = np.vstack([model.evaluate_on(kept.xi[i], grid) for i in range(len(kept))])
    lo = (1.0 - level) / 2.0
    lower = np.quantile(curves, lo, axis=0)
    upper = np.quantile(curves, 1.0 - lo, axis=0)
    return lower, upper


def relative_error(xi_hat, xi_star, model, grid=None) -> float:
    """||R(xi_hat) - R(xi_star)|| / ||R(xi_star)|| on the grid."""
    if grid is None:
        grid = model.grid
    grid = np.asarray(grid, dtype=float)
    reference = model.evaluate_on(np.asarray(xi_star, dtype=float), grid)
    return curve_relative_error(model.evaluate_on(np.asarray(xi_hat, dtype=float), grid), reference)


def curve_relative_error(curve, reference) -> float:
    """Relative L2 distance of an arbitrary curve from the reference curve."""
    reference = np.asarray(reference, dtype=float)
    norm = float(np.linalg.norm(reference))
    if norm == 0.0:
        raise ZeroSignal("reference signal has zero norm")
    return float(np.linalg.norm(np.asarray(curve, dtype=float) - reference) / norm)


def band_max_relative_error(chain: Chain, model, xi_star, level: float = 0.95) -> float:
    """Largest relative error among the band's lower and upper curves."""
    lower, upper = credible_band(chain, model, level=level)
    reference = model.evaluate(np.asarray(xi_star, dtype=float))
    return max(
        curve_relative_error(lower, reference),
        curve_relative_error(upper, reference),
    )


@dataclass(frozen=True)
class TrialResult:
    """Per-trial numbers that enter the repeated-run comparison table."""

    seed: int
    eta_mean: np.ndarray
    nu_mean: np.ndarray
    max_band_re: float
    failed: bool = False
    error: str = ""


@dataclass(frozen=True)
class TrialAggregate:
    """Across-trial mean and standard deviation in table layout."""

    trials: tuple[TrialResult, ...]
    mean: dict[str, float]
    sd: dict[str, float]

    @property
    def n_completed(self) -> int:
        return sum(not t.failed for t in self.trials)


def trial_result(chain: Chain, model, xi_star, seed: int, level: float = 0.95) -> TrialResult:
    kept = chain.kept()
    return TrialResult(
        seed=seed,
        eta_mean=kept.eta.mean(axis=0),
        nu_mean=kept.nu.mean(axis=0),
        max_band_re=band_max_relative_error(chain, model, xi_star, level),
    )


def aggregate_trials(trials) -> TrialAggregate:
    """Collapse per-trial summaries into mean(sd) columns.

    Failed trials are kept in the listing but excluded from the statistics;
    the aggregation does not depend on trial order.
    """
    trials = tuple(trials)
    completed = [t for t in trials if not t.failed]
    if not completed:
        raise EmptyChain("no completed trials to aggregate")
    # reduce in a canonical order so the statistics are exactly invariant
    # under permutations of the trial list
    completed.sort(key=lambda t: t.seed)
    columns: dict[str, np.ndarray] = {}
    d = completed[0].eta_mean.size
    free = completed[0].nu_mean.size
    for j in range(d):
        columns[f"eta_{j + 1}"] = np.array([t.eta_mean[j] for t in completed])
    for j in range(free):
        columns[f"nu_{j + 1}"] = np.array([t.nu_mean[j] for t in completed])
    columns["max_re"] = np.array([t.max_band_re for t in completed])
    mean = {k: float(v.mean()) for k, v in columns.items()}
    sd = {
        k: float(v.std(ddof=1)) if v.size > 1 else 0.0 for k, v in columns.items()
    }
    return TrialAggregate(trials=trials, mean=mean, sd=sd)
