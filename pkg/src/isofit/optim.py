"""Restoration of the free block by normalized gradient descent.

Given a bounded block ``eta``, the free block is restored as the least
squares minimizer ``nu_hat(eta) = argmin ||R(g(eta, nu)) - r_obs||``.
The descent uses the squared norm as its objective, takes steps of fixed
length along the negative normalized gradient, and shrinks the step
geometrically until the objective decreases.  Points outside the model's
domain are treated as non-improving, which keeps the iterates feasible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainViolation, NonFiniteValue

#: configured fall-back start for the free block of the isotherm ratio map
DEFAULT_CHROMA_NU0 = (3.0, 0.15)


@dataclass(frozen=True)
class GdSettings:
    """Step-size and termination settings for the descent."""

    max_iter: int = 500
    step: float = 0.1
    grad_tol: float = 1e-5
    backtrack_limit: int = 100
    shrink: float = 0.9

    def __post_init__(self):
        if self.max_iter < 1 or self.step <= 0.0 or self.grad_tol <= 0.0:
            raise DomainViolation("max_iter, step and grad_tol must be positive")
        if self.backtrack_limit < 1 or not 0.0 < self.shrink < 1.0:
            raise DomainViolation("need backtrack_limit >= 1 and shrink in (0, 1)")


@dataclass(frozen=True)
class GdResult:
    """Outcome of one descent run."""

    nu: np.ndarray
    xi: np.ndarray
    sq_loss: float
    iterations: int
    terminated: str  # "grad_tol" | "no_descent" | "max_iter"
    history: tuple[float, ...] = ()  # objective at the start and each accepted step

    @property
    def loss(self) -> float:
        return math.sqrt(self.sq_loss)

    @property
    def no_descent(self) -> bool:
        return self.terminated == "no_descent"

    @property
    def at_fixed_point(self) -> bool:
        """True when rerunning the descent from ``nu`` would return ``nu``."""
        return self.terminated != "max_iter"


def numerical_gradient(f, x) -> np.ndarray:
    """Central-difference gradient with coordinate step 1e-5 * max(1, |x_i|)."""
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        h = 1e-5 * max(1.0, abs(x[i]))
        up, down = x.copy(), x.copy()
        up[i] += h
        down[i] -= h
        f_up, f_down = f(up), f(down)
        if not (np.isfinite(f_up) and np.isfinite(f_down)):
            raise NonFiniteValue("gradient probe produced a non-finite value")
        grad[i] = (f_up - f_down) / (2.0 * h)
    return grad


def descend(objective, nu0, settings: GdSettings = GdSettings()):
    """Minimize ``objective`` from ``nu0``.

    Returns (nu, value, iterations, why, history); ``objective`` must
    return +inf outside its domain, and the starting point itself has to
    be feasible.
    """
    nu = np.asarray(nu0, dtype=float).copy()
    current = objective(nu)
    if not math.isfinite(current):
        raise DomainViolation("descent must start at a feasible point")
    history = [current]
    terminated = "max_iter"
    iterations = 0
    for iterations in range(1, settings.max_iter + 1):
        grad = numerical_gradient(objective, nu)
        gnorm = float(np.linalg.norm(grad))
        if gnorm < settings.grad_tol:
            terminated = "grad_tol"
            break
        direction = grad / gnorm
        improved = False
        step = settings.step
        for _ in range(settings.backtrack_limit):
            candidate = nu - step * direction
            value = objective(candidate)
            if value < current:
                nu, current = candidate, value
                improved = True
                break
            step *= settings.shrink
        if not improved:
            terminated = "no_descent"
            break
        history.append(current)
    return nu, current, iterations, terminated, history


def gradient_descent(ctx, eta, nu0, settings: GdSettings = GdSettings()) -> GdResult:
    """Restore the free block for ``eta`` by descent on the squared loss."""
    eta = np.asarray(eta, dtype=float)
    nu, sq, iters, why, history = descend(
        lambda v: ctx.sq_loss_or_inf(eta, v), nu0, settings
    )
    return GdResult(
        nu=nu, xi=ctx.reparam.restore(eta, nu), sq_loss=sq,
        iterations=iters, terminated=why, history=tuple(history),
    )


def nu_init(eta, reparam, observation, default=None) -> tuple[np.ndarray, bool]:
    """Deterministic starting point for the free block.

    Returns ``(nu0, used_fallback)``.  Ratio maps over mixture-style data
    start at the locations of the strongest response peaks; shape/scale
    maps use a moments match; the isotherm ratio map takes the configured
    default unchanged.
    """
    eta = np.asarray(eta, dtype=float)
    d = reparam.bounded_dim
    if reparam.kind == "chroma_ratio_sum":
        nu0 = np.asarray(default if default is not None else DEFAULT_CHROMA_NU0, dtype=float)
        return nu0.copy(), False
    if reparam.kind == "weight_sum":
        peaks = _peak_locations(observation, d)
        if peaks is not None:
            return peaks, False
        return _fallback_locations(observation, d, default), True
    # shape_scale: match each component's mean shape*scale to the signal mean;
    # shapes stay clear of 1 so grids containing t=0 keep a descent margin
    mean_t = _signal_mean(observation)
    if mean_t is not None and np.all(eta > 0.0):
        shapes = np.clip(mean_t / eta, 1.05, 100.0)
        return shapes, False
    nu0 = np.asarray(default if default is not None else np.full(d, 2.0), dtype=float)
    return nu0.copy(), True


def _peak_locations(observation, count: int) -> np.ndarray | None:
    values = observation.values
    n = values.size
    if n < 5:
        return None
    width = max(3, (n // 25) | 1)
    kernel = np.ones(width) / width
    smooth = np.convolve(values, kernel, mode="same")
    interior = (smooth[1:-1] > smooth[:-2]) & (smooth[1:-1] >= smooth[2:])
    idx = np.flatnonzero(interior) + 1
    if idx.size < count:
        return None
    top = idx[np.argsort(smooth[idx], kind="stable")[::-1][:count]]
    return np.sort(observation.times[top])


def _fallback_locations(observation, count: int, default) -> np.ndarray:
    if default is not None:
        return np.asarray(default, dtype=float).copy()
    lo, hi = observation.window
    return lo + (hi - lo) * (np.arange(count) + 0.5) / count


def _signal_mean(observation) -> float | None:
    weights = np.clip(observation.values, 0.0, None)
    total = np.trapezoid(weights, observation.times)
    if not np.isfinite(total) or total <= 0.0:
        return None
    return float(np.trapezoid(weights * observation.times, observation.times) / total)
