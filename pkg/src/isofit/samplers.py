"""The three Gibbs-style samplers and their shared machinery.

* ``run_mwg``  -- coordinate-wise Metropolis over (xi, sigma2).
* ``run_mgdg`` -- samples the bounded block eta coordinate-wise, restoring
  the free block by gradient descent for every proposal.
* ``run_malg`` -- samples the free block with an inner Langevin sub-chain
  and the bounded block with a Metropolis step; optionally works on
  tanh/exp-transformed coordinates so every element lives on the real line.

All three share the noise-variance step, which uses the exact
full-conditional density ratio implied by the joint posterior (a literal
variant that drops the residual factor is available for comparison).

Randomness comes from a counter-based generator (Philox) with one
sub-stream per block, so a chain is bit-reproducible from its seed alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import DomainViolation, NonFiniteValue
from .optim import GdResult, GdSettings, gradient_descent, nu_init
from .posterior import (
    SUPPORT_ERRORS,
    PosteriorContext,
    sigma2_log_ratio,
    sigma2_log_ratio_literal_alg3,
)
from .reparam import apply_sort_rule, from_unconstrained, to_unconstrained
from .types import Chain

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

SAMPLER_KINDS = ("mwg", "mgdg", "malg")

_PROPOSAL_ERRORS = SUPPORT_ERRORS + (NonFiniteValue,)


@dataclass(frozen=True)
class SamplerOptions:
    """Artifact-level knobs that the experiment tables do not pin down."""

    sigma2_proposal_sd: float = 0.1
    fixed_sigma2: float | None = None
    sigma2_ratio_mode: str = "exact"  # "exact" | "literal_alg3"
    qld_squared: bool = True          # False reproduces the unsquared kernel verbatim
    unconstrained: bool = False       # MALG on tanh/exp-transformed coordinates
    eta_block: bool = True            # MALG: single block proposal for eta
    recompute_per_coordinate: bool = False  # MGDG: re-run GD inside the sweep
    gd: GdSettings = field(default_factory=GdSettings)
    # deeper iteration budget for the one-off restoration of the selected
    # start, so the chain begins at an equilibrated free block even when the
    # per-proposal budget is small
    init_gd_max_iter: int | None = None
    nu_init_default: tuple | None = None

    def __post_init__(self):
        if self.sigma2_proposal_sd <= 0.0:
            raise DomainViolation("sigma2 proposal sd must be positive")
        if self.fixed_sigma2 is not None and self.fixed_sigma2 <= 0.0:
            raise DomainViolation("a fixed sigma2 must be positive")
        if self.sigma2_ratio_mode not in ("exact", "literal_alg3"):
            raise DomainViolation(f"unknown sigma2 ratio mode {self.sigma2_ratio_mode!r}")


def substreams(seed: int, names=("init", "sigma2", "eta", "nu")) -> dict[str, np.random.Generator]:
    """Independent Philox streams derived from one 64-bit seed."""
    children = np.random.SeedSequence(int(seed)).spawn(len(names))
    return {
        name: np.random.Generator(np.random.Philox(child))
        for name, child in zip(names, children)
    }


# ---------------------------------------------------------------------------
# proposal distributions


def truncated_normal_sample(rng, mu: float, sd: float, lo: float, hi: float) -> float:
    """One draw from Normal(mu, sd^2) restricted to [lo, hi], by inverse CDF."""
    if not lo < hi:
        raise DomainViolation("need lo < hi")
    if sd <= 0.0:
        raise DomainViolation("sd must be positive")
    f_lo = ndtr((lo - mu) / sd)
    f_hi = ndtr((hi - mu) / sd)
    u = rng.uniform()
    return float(mu + sd * ndtri(f_lo + u * (f_hi - f_lo)))


def truncated_normal_logpdf(x: float, mu: float, sd: float, lo: float, hi: float) -> float:
    """Log density of the truncated normal at x (``-inf`` outside [lo, hi])."""
    if x < lo or x > hi:
        return -math.inf
    z = (x - mu) / sd
    norm = ndtr((hi - mu) / sd) - ndtr((lo - mu) / sd)
    return -0.5 * z * z - _LOG_SQRT_2PI - math.log(sd) - math.log(norm)


def _tn_log_hastings(x_old: float, x_new: float, sd: float, lo: float, hi: float) -> float:
    # the normal kernel is symmetric; only truncation constants survive
    z_old = ndtr((hi - x_old) / sd) - ndtr((lo - x_old) / sd)
    z_new = ndtr((hi - x_new) / sd) - ndtr((lo - x_new) / sd)
    return math.log(z_old) - math.log(z_new)


def init_sigma2(alpha: float, beta: float, rng) -> float:
    """One draw from the inverse-gamma prior IG(alpha, beta)."""
    if alpha <= 0.0 or beta <= 0.0:
        raise DomainViolation("alpha and beta must be positive")
    return float(beta / rng.gamma(alpha))


def init_eta(ctx: PosteriorContext, rng, candidates: int | None = None,
             gd_settings: GdSettings | None = None,
             nu_default=None) -> tuple[np.ndarray, GdResult]:
    """Pick the best of M uniform candidates by their restored loss."""
    m = candidates if candidates is not None else ctx.psi.init_candidates
    if m < 1:
        raise DomainViolation("need at least one candidate")
    settings = gd_settings or GdSettings()
    d = ctx.reparam.bounded_dim
    best = None
    best_eta = None
    for _ in range(m):
        eta = rng.uniform(size=d)
        try:
            nu0, _ = nu_init(eta, ctx.reparam, ctx.observation, default=nu_default)
            result = gradient_descent(ctx, eta, nu0, settings)
        except _PROPOSAL_ERRORS:
            continue
        if best is None or result.sq_loss < best.sq_loss:
            best, best_eta = result, eta
    if best is None:
        raise DomainViolation("no feasible initialization candidate was found")
    return best_eta, best


# ---------------------------------------------------------------------------
# shared blocks


class _Sigma2Block:
    """Log-normal random-walk Metropolis step on the noise variance."""

    def __init__(self, ctx: PosteriorContext, options: SamplerOptions, rng):
        self.n = ctx.n
        self.alpha = ctx.psi.alpha
        self.beta = ctx.psi.beta
        self.sd = options.sigma2_proposal_sd
        self.literal = options.sigma2_ratio_mode == "literal_alg3"
        self.rng = rng

    def step(self, sigma2: float, ete: float) -> tuple[float, bool]:
        proposal = float(sigma2 * math.exp(self.sd * self.rng.standard_normal()))
        if self.literal:
            log_ratio = sigma2_log_ratio_literal_alg3(
                proposal, sigma2, ete, self.n, self.alpha, self.beta
            )
        else:
            log_ratio = sigma2_log_ratio(proposal, sigma2, ete, self.n, self.alpha, self.beta)
        # Hastings term of the log-normal walk: q(old|new)/q(new|old) = new/old
        log_ratio += math.log(proposal / sigma2)
        if math.log(self.rng.uniform()) < log_ratio:
            return proposal, True
        return sigma2, False


class _Recorder:
    def __init__(self, k: int, d: int, free: int, dim: int, blocks: tuple[str, ...]):
        self.eta = np.empty((k, d))
        self.nu = np.empty((k, free))
        self.xi = np.empty((k, dim))
        self.sigma2 = np.empty(k)
        self.loss = np.empty(k)
        self.accepted = np.empty((k, len(blocks)))
        self.blocks = blocks

    def store(self, k, eta, nu, xi, sigma2, ete, accepted):
        self.eta[k] = eta
        self.nu[k] = nu
        self.xi[k] = xi
        self.sigma2[k] = sigma2
        self.loss[k] = math.sqrt(ete)
        self.accepted[k] = accepted

    def chain(self, burn_in: int, seed: int, meta: dict) -> Chain:
        return Chain(
            self.eta, self.nu, self.xi, self.sigma2, self.loss,
            self.accepted, self.blocks, burn_in, seed, meta,
        )


def _resolve_start(ctx: PosteriorContext, options: SamplerOptions, streams):
    """Shared initialization: eta0 via candidate search, beta, sigma2 draw.

    Returns (ctx with beta resolved, eta0, gd0, sigma2_0).
    """
    eta0, gd0 = init_eta(
        ctx, streams["init"], gd_settings=options.gd, nu_default=options.nu_init_default
    )
    if options.init_gd_max_iter and options.init_gd_max_iter > gd0.iterations:
        deep = replace(options.gd, max_iter=options.init_gd_max_iter)
        gd0 = gradient_descent(ctx, eta0, gd0.nu, deep)
    psi = ctx.psi
    if psi.beta is None:
        psi = psi.with_beta(gd0.sq_loss / ctx.n)
        ctx = replace(ctx, psi=psi)
    if options.fixed_sigma2 is not None:
        sigma2 = float(options.fixed_sigma2)
    else:
        sigma2 = init_sigma2(psi.alpha, psi.beta, streams["sigma2"])
    return ctx, eta0, gd0, sigma2


def _per_coordinate_sd(psi, count: int) -> np.ndarray:
    sd = psi.proposal_sd
    if sd.size == count:
        return sd
    if sd.size == 1:
        return np.full(count, sd[0])
    raise DomainViolation(f"expected {count} proposal sds, got {sd.size}")


def _meta(ctx, options, sampler, extra=None) -> dict:
    meta = {
        "sampler": sampler,
        "alpha": ctx.psi.alpha,
        "beta": ctx.psi.beta,
        "gamma": ctx.psi.gamma,
        "sort_rule": ctx.psi.sort_rule,
    }
    if extra:
        meta.update(extra)
    return meta


# ---------------------------------------------------------------------------
# Metropolis-within-Gibbs over all coordinates


def run_mwg(ctx: PosteriorContext, options: SamplerOptions, seed: int) -> Chain:
    """Coordinate-wise Metropolis over every element of (xi, sigma2).

    Each xi coordinate is proposed from a truncated normal on [0, inf) with
    its configured standard deviation; acceptance uses the joint posterior
    ratio with the Hastings correction for the truncation.
    """
    streams = substreams(seed)
    ctx, _, gd0, sigma2 = _resolve_start(ctx, options, streams)
    xi = gd0.xi.copy()
    ete = gd0.sq_loss
    psi = ctx.psi
    dim = ctx.model.dimension
    sd = _per_coordinate_sd(psi, dim)
    sample_sigma2 = options.fixed_sigma2 is None
    blocks = (("sigma2",) if sample_sigma2 else ()) + tuple(
        f"xi_{i + 1}" for i in range(dim)
    )
    rec = _Recorder(psi.chain_length, ctx.reparam.bounded_dim, ctx.reparam.free_dim,
                    dim, blocks)
    sigma2_block = _Sigma2Block(ctx, options, streams["sigma2"])
    rng = streams["eta"]

    for k in range(psi.chain_length):
        flags = []
        if sample_sigma2:
            sigma2, ok = sigma2_block.step(sigma2, ete)
            flags.append(ok)
        scale = ctx.log_kernel_scale(sigma2)
        for j in range(dim):
            proposal = truncated_normal_sample(rng, xi[j], sd[j], 0.0, math.inf)
            candidate = xi.copy()
            candidate[j] = proposal
            try:
                ete_cand = ctx.sq_loss_xi(candidate)
            except SUPPORT_ERRORS:
                ete_cand = math.inf
            log_ratio = -(ete_cand - ete) * scale + _tn_log_hastings(
                xi[j], proposal, sd[j], 0.0, math.inf
            )
            accept = math.log(rng.uniform()) < log_ratio
            if accept:
                xi, ete = candidate, ete_cand
            flags.append(accept)
        eta, nu = ctx.reparam.split(xi)
        rec.store(k, eta, nu, xi, sigma2, ete, flags)
    return rec.chain(psi.burn_in, seed, _meta(ctx, options, "mwg"))


# ---------------------------------------------------------------------------
# Metropolis-embedded gradient-descent-within-Gibbs


def run_mgdg(ctx: PosteriorContext, options: SamplerOptions, seed: int) -> Chain:
    """Gibbs sweep over sigma2 and the eta coordinates with embedded descent.

    Every eta proposal is completed to a full parameter by running the
    restoration descent (warm-started from the current restored block), and
    judged by the exact conditional ratio; the descent output is refreshed
    once per sweep (per coordinate in the literal mode) and the sort rule
    is applied before recording.
    """
    streams = substreams(seed)
    ctx, eta, gd0, sigma2 = _resolve_start(ctx, options, streams)
    psi = ctx.psi
    d = ctx.reparam.bounded_dim
    sd = _per_coordinate_sd(psi, d)
    nu_hat = gd0.nu.copy()
    xi_hat = gd0.xi.copy()
    ete = gd0.sq_loss
    sample_sigma2 = options.fixed_sigma2 is None
    blocks = (("sigma2",) if sample_sigma2 else ()) + tuple(
        f"eta_{j + 1}" for j in range(d)
    )
    rec = _Recorder(psi.chain_length, d, ctx.reparam.free_dim, ctx.model.dimension, blocks)
    sigma2_block = _Sigma2Block(ctx, options, streams["sigma2"])
    rng = streams["eta"]

    # results of GD restarted at their own output are reused instead of
    # re-descended; this is exact because such restarts change nothing
    memo: dict[tuple[bytes, bytes], GdResult] = {}

    def descend_from(eta_vec: np.ndarray, warm: np.ndarray) -> GdResult:
        key = (eta_vec.tobytes(), warm.tobytes())
        hit = memo.get(key)
        if hit is not None:
            return hit
        result = gradient_descent(ctx, eta_vec, warm, options.gd)
        if result.at_fixed_point:
            if len(memo) > 64:
                memo.clear()
            memo[(eta_vec.tobytes(), result.nu.tobytes())] = result
        return result

    for k in range(psi.chain_length):
        flags = []
        if sample_sigma2:
            sigma2, ok = sigma2_block.step(sigma2, ete)
            flags.append(ok)
        scale = ctx.log_kernel_scale(sigma2)
        for j in range(d):
            proposal = truncated_normal_sample(rng, eta[j], sd[j], 0.0, 1.0)
            eta_cand = eta.copy()
            eta_cand[j] = proposal
            try:
                cand = descend_from(eta_cand, nu_hat)
                ete_cand = cand.sq_loss
            except _PROPOSAL_ERRORS:
                cand, ete_cand = None, math.inf
            log_ratio = -(ete_cand - ete) * scale + _tn_log_hastings(
                eta[j], proposal, sd[j], 0.0, 1.0
            )
            accept = math.log(rng.uniform()) < log_ratio and cand is not None
            if accept:
                eta, nu_hat, xi_hat, ete = eta_cand, cand.nu, cand.xi, cand.sq_loss
            flags.append(accept)
            if options.recompute_per_coordinate:
                nu_hat, xi_hat, ete = _refresh(descend_from, eta, nu_hat, xi_hat, ete)
        if not options.recompute_per_coordinate:
            nu_hat, xi_hat, ete = _refresh(descend_from, eta, nu_hat, xi_hat, ete)
        eta, nu_hat = apply_sort_rule(psi.sort_rule, eta, nu_hat)
        xi_hat = ctx.reparam.restore(eta, nu_hat)
        rec.store(k, eta, nu_hat, xi_hat, sigma2, ete, flags)
    return rec.chain(psi.burn_in, seed, _meta(ctx, options, "mgdg"))


def _refresh(descend_from, eta, nu_hat, xi_hat, ete):
    """Re-descend at the current state; keep the state if probes leave support.

    A state whose free block sits within a finite-difference step of the
    support boundary cannot be re-descended; retaining it is deterministic
    and leaves the kernel intact.
    """
    try:
        refreshed = descend_from(eta, nu_hat)
    except _PROPOSAL_ERRORS:
        return nu_hat, xi_hat, ete
    return refreshed.nu, refreshed.xi, refreshed.sq_loss


# ---------------------------------------------------------------------------
# Metropolis-adjusted Langevin-dynamics-within-Gibbs


def _langevin_log_q(delta: np.ndarray, tau: float, squared: bool) -> float:
    """Log transition kernel of the drifted proposal, up to its constant.

    ``delta = destination - origin - tau * drift(origin)``.  The squared
    norm gives the standard Gaussian Langevin kernel; the unsquared
    variant reproduces the verbatim formula and is kept for comparison.
    """
    norm_sq = float(delta @ delta)
    return -(norm_sq if squared else math.sqrt(norm_sq)) / (4.0 * tau)


def run_malg(ctx: PosteriorContext, options: SamplerOptions, seed: int) -> Chain:
    """Gibbs sweep: sigma2 step, m Langevin sub-steps on nu, one eta step.

    In unconstrained mode the state is (arctanh(2 eta - 1), log nu), the
    eta proposal is a symmetric normal walk, and the Langevin dynamics run
    on log nu; the recorded draws are always on the natural scale.
    """
    streams = substreams(seed)
    ctx, eta, gd0, sigma2 = _resolve_start(ctx, options, streams)
    psi = ctx.psi
    d = ctx.reparam.bounded_dim
    free = ctx.reparam.free_dim
    sd = _per_coordinate_sd(psi, d)
    nu = gd0.nu.copy()
    ete = gd0.sq_loss
    tau, m = psi.tau, psi.m
    sample_sigma2 = options.fixed_sigma2 is None
    blocks = (("sigma2",) if sample_sigma2 else ()) + ("nu", "eta")
    rec = _Recorder(psi.chain_length, d, free, ctx.model.dimension, blocks)
    sigma2_block = _Sigma2Block(ctx, options, streams["sigma2"])
    eta_rng = streams["eta"]
    nu_rng = streams["nu"]

    transformed = options.unconstrained
    if transformed:
        eta_s, nu_s = to_unconstrained(eta, nu)
    else:
        eta_s, nu_s = eta.copy(), nu.copy()

    def sq_at(eta_state: np.ndarray, nu_state: np.ndarray) -> float:
        if transformed:
            try:
                eta_n, nu_n = from_unconstrained(eta_state, nu_state)
            except SUPPORT_ERRORS:
                return math.inf
            return ctx.sq_loss_or_inf(eta_n, nu_n)
        return ctx.sq_loss_or_inf(eta_state, nu_state)

    def drift_at(eta_state: np.ndarray, nu_state: np.ndarray, scale: float) -> np.ndarray:
        grad = np.empty(free)
        for i in range(free):
            h = max(1e-5 * abs(nu_state[i]), 1e-7)
            up, down = nu_state.copy(), nu_state.copy()
            up[i] += h
            down[i] -= h
            f_up, f_down = sq_at(eta_state, up), sq_at(eta_state, down)
            if not (math.isfinite(f_up) and math.isfinite(f_down)):
                raise NonFiniteValue("drift probe left the support")
            grad[i] = (f_up - f_down) / (2.0 * h)
        return -scale * grad

    for k in range(psi.chain_length):
        flags = []
        if sample_sigma2:
            sigma2, ok = sigma2_block.step(sigma2, ete)
            flags.append(ok)
        scale = ctx.log_kernel_scale(sigma2)

        # --- Langevin sub-chain on the free block
        accepted = 0
        drift = drift_at(eta_s, nu_s, scale)
        for _ in range(m):
            noise = nu_rng.standard_normal(free)
            nu_cand = nu_s + tau * drift + math.sqrt(2.0 * tau) * noise
            u = nu_rng.uniform()
            ete_cand = sq_at(eta_s, nu_cand)
            if math.isfinite(ete_cand):
                try:
                    drift_cand = drift_at(eta_s, nu_cand, scale)
                except NonFiniteValue:
                    drift_cand = None
            else:
                drift_cand = None
            if drift_cand is not None:
                log_q_fwd = _langevin_log_q(
                    nu_cand - nu_s - tau * drift, tau, options.qld_squared
                )
                log_q_rev = _langevin_log_q(
                    nu_s - nu_cand - tau * drift_cand, tau, options.qld_squared
                )
                log_ratio = -(ete_cand - ete) * scale + log_q_rev - log_q_fwd
                if math.log(u) < log_ratio:
                    nu_s, ete, drift = nu_cand, ete_cand, drift_cand
                    accepted += 1
        flags.append(accepted / m)

        # --- Metropolis step on the bounded block
        if options.eta_block:
            eta_cand, log_hastings = _propose_eta(
                eta_s, sd, eta_rng, transformed, range(d)
            )
            u = eta_rng.uniform()
            ete_cand = sq_at(eta_cand, nu_s)
            log_ratio = -(ete_cand - ete) * scale + log_hastings
            ok = math.log(u) < log_ratio
            if ok:
                eta_s, ete = eta_cand, ete_cand
            flags.append(ok)
        else:
            ok_any = 0
            for j in range(d):
                eta_cand, log_hastings = _propose_eta(
                    eta_s, sd, eta_rng, transformed, (j,)
                )
                u = eta_rng.uniform()
                ete_cand = sq_at(eta_cand, nu_s)
                log_ratio = -(ete_cand - ete) * scale + log_hastings
                if math.log(u) < log_ratio:
                    eta_s, ete = eta_cand, ete_cand
                    ok_any += 1
            flags.append(ok_any / d)

        # --- natural-scale state, sorting, record
        if transformed:
            eta, nu = from_unconstrained(eta_s, nu_s)
        else:
            eta, nu = eta_s.copy(), nu_s.copy()
        eta, nu = apply_sort_rule(psi.sort_rule, eta, nu)
        if transformed:
            eta_s, nu_s = to_unconstrained(eta, nu)
        else:
            eta_s, nu_s = eta.copy(), nu.copy()
        xi = ctx.reparam.restore(eta, nu)
        rec.store(k, eta, nu, xi, sigma2, ete, flags)
    return rec.chain(psi.burn_in, seed, _meta(ctx, options, "malg"))


def _propose_eta(eta_s, sd, rng, transformed: bool, coords) -> tuple[np.ndarray, float]:
    """Propose new bounded-block coordinates; returns (candidate, log Hastings)."""
    candidate = eta_s.copy()
    log_hastings = 0.0
    for j in coords:
        if transformed:
            candidate[j] = eta_s[j] + sd[j] * rng.standard_normal()
        else:
            candidate[j] = truncated_normal_sample(rng, eta_s[j], sd[j], 0.0, 1.0)
            log_hastings += _tn_log_hastings(eta_s[j], candidate[j], sd[j], 0.0, 1.0)
    return candidate, log_hastings


def run_sampler(kind: str, ctx: PosteriorContext, options: SamplerOptions, seed: int) -> Chain:
    """Dispatch by sampler name."""
    if kind == "mwg":
        return run_mwg(ctx, options, seed)
    if kind == "mgdg":
        return run_mgdg(ctx, options, seed)
    if kind == "malg":
        return run_malg(ctx, options, seed)
    raise DomainViolation(f"unknown sampler kind {kind!r}")
