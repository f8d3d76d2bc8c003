"""Batch orchestration: synthesize data, run fits, aggregate repeats.

Every command writes a manifest (config hash, seed, package versions) next
to its outputs, so a run can be reproduced byte-for-byte from the manifest
plus the configuration file alone.
"""

from __future__ import annotations

import csv
import json
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, config_hash, parse_config, serialize_config
from .diagnostics import (
    TrialAggregate,
    TrialResult,
    aggregate_trials,
    credible_band,
    curve_relative_error,
    summarize,
)
from .errors import ConfigError, IsofitError
from .posterior import PosteriorContext
from .samplers import run_sampler
from .types import Chain, Observation


def _fmt(x: float) -> str:
    return repr(float(x))


def _versions() -> dict:
    import numba
    import scipy

    return {
        "isofit": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


def write_manifest(out_dir: Path, config: RunConfig, seed: int, extra=None) -> Path:
    payload = {
        "config_sha256": config_hash(config),
        "name": config.name,
        "seed": int(seed),
        "data_seed": int(config.data_seed),
        "versions": _versions(),
    }
    if extra:
        payload.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------------------
# observation synthesis and IO


def synthesize_observation(config: RunConfig) -> tuple[Observation, np.ndarray]:
    """Noisy observation from the configured truth; returns (obs, clean)."""
    model = config.build_model()
    clean = model.evaluate(np.asarray(config.xi_star))
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(config.data_seed)))
    noise = rng.normal(0.0, np.sqrt(config.noise_variance), clean.size)
    values = clean + noise if config.noise_variance > 0.0 else clean.copy()
    return Observation(model.grid, values, config.window), clean


def write_observation(path: Path, observation: Observation) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "r"])
        for t, r in zip(observation.times, observation.values):
            writer.writerow([_fmt(t), _fmt(r)])


def read_observation(path, window=None) -> Observation:
    with open(path, "r", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if [h.strip() for h in header] != ["t", "r"]:
            raise ConfigError(f"observation file {path} must have header 't,r'")
        rows = [(float(t), float(r)) for t, r in reader]
    times = np.array([row[0] for row in rows])
    values = np.array([row[1] for row in rows])
    if window is None:
        window = (float(times[0]), float(times[-1]))
    return Observation(times, values, window)


def simulate(config: RunConfig, out_dir) -> Path:
    """Write the synthetic observation CSV plus manifest; returns its path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    observation, _ = synthesize_observation(config)
    obs_path = out_dir / "observation.csv"
    write_observation(obs_path, observation)
    write_manifest(out_dir, config, config.seed, {"command": "simulate"})
    (out_dir / "config.ini").write_text(serialize_config(config))
    return obs_path


# ---------------------------------------------------------------------------
# chain persistence


def chain_columns(chain: Chain) -> tuple[list[str], list[list[str]]]:
    d = chain.eta.shape[1]
    free = chain.nu.shape[1]
    dim = chain.xi.shape[1]
    header = (
        ["seed", "iter", "burnin"]
        + [f"eta_{j + 1}" for j in range(d)]
        + [f"nu_{j + 1}" for j in range(free)]
        + [f"xi_{j + 1}" for j in range(dim)]
        + ["sigma2", "loss"]
        + [f"accept_{name}" for name in chain.block_names]
    )
    rows = []
    for k in range(len(chain)):
        row = [str(chain.seed), str(k), str(int(k < chain.burn_in))]
        row += [_fmt(v) for v in chain.eta[k]]
        row += [_fmt(v) for v in chain.nu[k]]
        row += [_fmt(v) for v in chain.xi[k]]
        row += [_fmt(chain.sigma2[k]), _fmt(chain.loss[k])]
        row += [_fmt(v) for v in chain.accepted[k]]
        rows.append(row)
    return header, rows


def write_chain(path: Path, chain: Chain) -> None:
    header, rows = chain_columns(chain)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def read_chain(path) -> Chain:
    with open(path, "r", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        rows = list(reader)
    if not rows:
        raise ConfigError(f"chain file {path} has no records")
    index = {name: i for i, name in enumerate(header)}
    d = sum(1 for name in header if name.startswith("eta_"))
    free = sum(1 for name in header if name.startswith("nu_"))
    dim = sum(1 for name in header if name.startswith("xi_"))
    blocks = tuple(name[len("accept_"):] for name in header if name.startswith("accept_"))
    k = len(rows)
    data = np.array([[float(v) for v in row] for row in rows])
    burn = int(data[:, index["burnin"]].sum())
    return Chain(
        eta=data[:, [index[f"eta_{j + 1}"] for j in range(d)]],
        nu=data[:, [index[f"nu_{j + 1}"] for j in range(free)]],
        xi=data[:, [index[f"xi_{j + 1}"] for j in range(dim)]],
        sigma2=data[:, index["sigma2"]],
        loss=data[:, index["loss"]],
        accepted=data[:, [index[f"accept_{b}"] for b in blocks]],
        block_names=blocks,
        burn_in=burn,
        seed=int(data[0, index["seed"]]) if k else 0,
    )


def write_summary(path: Path, chain: Chain) -> None:
    summary = summarize(chain)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["name", "mean", "sd", "q2.5", "q25", "q50", "q75", "q97.5", "ess"])
        for i, name in enumerate(summary.names):
            writer.writerow(
                [name, _fmt(summary.mean[i]), _fmt(summary.sd[i])]
                + [_fmt(q) for q in summary.quantiles[i]]
                + [_fmt(summary.ess[i])]
            )


def write_band(path: Path, grid, lower, upper) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "lower", "upper"])
        for t, lo, hi in zip(grid, lower, upper):
            writer.writerow([_fmt(t), _fmt(lo), _fmt(hi)])


# ---------------------------------------------------------------------------
# fit


@dataclass(frozen=True)
class FitResult:
    chain: Chain
    metrics: dict
    out_dir: Path | None


def fit_in_memory(config: RunConfig, sampler: str | None = None,
                  seed: int | None = None,
                  observation: Observation | None = None) -> FitResult:
    """Run one chain and compute its report metrics without touching disk."""
    sampler = sampler or config.sampler
    seed = config.seed if seed is None else int(seed)
    model = config.build_model()
    if observation is None:
        observation, clean = synthesize_observation(config)
    else:
        clean = model.evaluate(np.asarray(config.xi_star))
    ctx = PosteriorContext(
        model=model,
        reparam=config.reparam(),
        observation=observation,
        psi=config.hyperparameters(sampler),
    )
    chain = run_sampler(sampler, ctx, config.sampler_options(), seed)
    xi_star = np.asarray(config.xi_star)
    lower, upper = credible_band(chain, model)
    metrics = {
        "sampler": sampler,
        "seed": seed,
        "beta_effective": chain.meta.get("beta"),
        "sigma2_mean": float(chain.kept().sigma2.mean()),
        "loss_mean": float(chain.kept().loss.mean()),
        "eta_mean": chain.kept().eta.mean(axis=0).tolist(),
        "nu_mean": chain.kept().nu.mean(axis=0).tolist(),
        "xi_mean": chain.kept().xi.mean(axis=0).tolist(),
        "re_observation": curve_relative_error(observation.values, clean),
        "re_band_lower": curve_relative_error(lower, clean),
        "re_band_upper": curve_relative_error(upper, clean),
    }
    metrics["re_band_max"] = max(metrics["re_band_lower"], metrics["re_band_upper"])
    return FitResult(chain=chain, metrics=metrics, out_dir=None)


def fit(config: RunConfig, out_dir, sampler: str | None = None,
        seed: int | None = None, obs_path=None) -> FitResult:
    """Run one chain and persist chain, summary, band, and report."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    observation = read_observation(obs_path, config.window) if obs_path else None
    result = fit_in_memory(config, sampler, seed, observation)
    chain = result.chain
    model = config.build_model()
    write_chain(out_dir / "chain.csv", chain)
    write_summary(out_dir / "summary.csv", chain)
    lower, upper = credible_band(chain, model)
    write_band(out_dir / "band.csv", model.grid, lower, upper)
    (out_dir / "metrics.json").write_text(
        json.dumps(result.metrics, indent=2, sort_keys=True) + "\n"
    )
    _write_report(out_dir / "report.txt", config, chain, result.metrics)
    write_manifest(
        out_dir, config, chain.seed,
        {"command": "fit", "sampler": result.metrics["sampler"],
         "beta_effective": result.metrics["beta_effective"]},
    )
    (out_dir / "config.ini").write_text(serialize_config(config))
    return FitResult(chain=chain, metrics=result.metrics, out_dir=out_dir)


def _write_report(path: Path, config: RunConfig, chain: Chain, metrics: dict) -> None:
    from .diagnostics import acceptance_rates

    lines = [
        f"run: {config.name} (sampler {metrics['sampler']}, seed {metrics['seed']})",
        f"iterations: {len(chain)} (burn-in {chain.burn_in})",
        f"beta (effective): {metrics['beta_effective']}",
        f"posterior mean xi: {np.array2string(np.asarray(metrics['xi_mean']), precision=6)}",
        f"posterior mean sigma2: {metrics['sigma2_mean']:.6g}",
        f"mean loss: {metrics['loss_mean']:.6g}",
        "relative errors vs clean truth:",
        f"  observation: {metrics['re_observation']:.4%}",
        f"  band lower:  {metrics['re_band_lower']:.4%}",
        f"  band upper:  {metrics['re_band_upper']:.4%}",
        "acceptance rates:",
    ]
    for name, rate in acceptance_rates(chain).items():
        lines.append(f"  {name}: {rate:.3f}")
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# repeated trials


def _trial_task(args) -> dict:
    text, sampler, seed = args
    config = parse_config(text)
    try:
        result = fit_in_memory(config, sampler, seed)
        kept = result.chain.kept()
        return {
            "seed": seed,
            "eta_mean": kept.eta.mean(axis=0).tolist(),
            "nu_mean": kept.nu.mean(axis=0).tolist(),
            "max_band_re": result.metrics["re_band_max"],
            "failed": False,
            "error": "",
        }
    except Exception as exc:  # isolate poisoned trials, keep the rest
        return {"seed": seed, "eta_mean": [], "nu_mean": [],
                "max_band_re": float("nan"), "failed": True,
                "error": f"{type(exc).__name__}: {exc}"}


def repeated_trials(config: RunConfig, n_reps: int, seeds=None,
                    sampler: str | None = None, workers: int | None = None) -> TrialAggregate:
    """Run ``n_reps`` chains on the same observation and aggregate them."""
    if n_reps < 1:
        raise ConfigError("need at least one repetition")
    if seeds is None:
        seeds = [config.seed + i for i in range(n_reps)]
    seeds = list(seeds)[:n_reps]
    text = serialize_config(config)
    tasks = [(text, sampler or config.sampler, int(s)) for s in seeds]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            raw = list(pool.map(_trial_task, tasks))
    else:
        raw = [_trial_task(task) for task in tasks]
    trials = [
        TrialResult(
            seed=r["seed"],
            eta_mean=np.asarray(r["eta_mean"]),
            nu_mean=np.asarray(r["nu_mean"]),
            max_band_re=r["max_band_re"],
            failed=r["failed"],
            error=r["error"],
        )
        for r in raw
    ]
    return aggregate_trials(trials)


def write_aggregate(path: Path, aggregate: TrialAggregate) -> None:
    keys = list(aggregate.mean.keys())
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["row", "seed", "status"] + keys)
        for i, trial in enumerate(aggregate.trials):
            if trial.failed:
                writer.writerow([f"trial_{i}", trial.seed, f"failed: {trial.error}"]
                                + [""] * len(keys))
                continue
            values = list(trial.eta_mean) + list(trial.nu_mean) + [trial.max_band_re]
            writer.writerow([f"trial_{i}", trial.seed, "ok"] + [_fmt(v) for v in values])
        writer.writerow(["mean", "", ""] + [_fmt(aggregate.mean[k]) for k in keys])
        writer.writerow(["sd", "", ""] + [_fmt(aggregate.sd[k]) for k in keys])


def repeat(config: RunConfig, out_dir, n_reps: int, sampler: str | None = None,
           workers: int | None = None) -> TrialAggregate:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    aggregate = repeated_trials(config, n_reps, sampler=sampler, workers=workers)
    write_aggregate(out_dir / "aggregate.csv", aggregate)
    write_manifest(out_dir, config, config.seed,
                   {"command": "repeat", "n_reps": n_reps,
                    "completed": aggregate.n_completed})
    (out_dir / "config.ini").write_text(serialize_config(config))
    return aggregate


def resolve_workers(cli_value: int | None) -> int | None:
    """--workers beats the ISOFIT_WORKERS environment variable."""
    if cli_value is not None:
        return cli_value
    env = os.environ.get("ISOFIT_WORKERS")
    if env is None:
        return None
    try:
        return max(1, int(env))
    except ValueError as exc:
        raise ConfigError(f"ISOFIT_WORKERS must be an integer, got {env!r}") from exc
