"""Closed-form surrogate forward models.

Every model carries a fixed evaluation grid and maps a parameter vector to
the signal on that grid.  Evaluation is pure: the same inputs always give
bit-identical outputs.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .errors import DegeneratePair, DimensionMismatch, DomainViolation
from .reparam import validate_parameter_vector

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gaussian_mixture_signal(xi, t: float) -> float:
    """Sum over pairs of xi: weight * standard-normal bump at the pair sum.

    Component i contributes ``w_i * phi(t - mu_i)`` with
    ``w_i = xi[2i] / (xi[2i] + xi[2i+1])`` and ``mu_i = xi[2i] + xi[2i+1]``.
    """
    xi = validate_parameter_vector(xi)
    if xi.size % 2:
        raise DimensionMismatch("gaussian mixture needs an even-length parameter")
    first, second = xi[0::2], xi[1::2]
    sums = first + second
    if np.any(sums == 0.0):
        raise DegeneratePair("component pair sums to zero")
    z = t - sums
    return float(np.sum((first / sums) * _INV_SQRT_2PI * np.exp(-0.5 * z * z)))


def gamma_mixture_signal(xi, t: float) -> float:
    """Sum of two unweighted Gamma densities, shape xi[2i], scale xi[2i+1].

    The point t = 0 is defined only for shapes >= 1 (density 1/scale at
    shape exactly 1, zero above); shapes below 1 diverge there and are
    rejected.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (4,):
        raise DimensionMismatch("gamma mixture takes exactly 4 parameters")
    if t < 0.0:
        raise DomainViolation("gamma densities are supported on t >= 0")
    shapes, scales = xi[0::2], xi[1::2]
    if np.any(shapes <= 0.0) or np.any(scales <= 0.0):
        raise DomainViolation("shapes and scales must be positive")
    total = 0.0
    for k, theta in zip(shapes, scales):
        if t == 0.0:
            if k < 1.0:
                raise DomainViolation("gamma density diverges at t=0 for shape < 1")
            total += (1.0 / theta) if k == 1.0 else 0.0
            continue
        log_pdf = (k - 1.0) * math.log(t) - t / theta - gammaln(k) - k * math.log(theta)
        total += math.exp(log_pdf)
    return total


def evaluate_signal(model, xi, grid=None) -> np.ndarray:
    """Evaluate ``model`` at ``xi`` on ``grid`` (default: the model's grid)."""
    if grid is None:
        return model.evaluate(xi)
    return model.evaluate_on(xi, np.asarray(grid, dtype=float))


class GaussianMixtureModel:
    """Mixture of ``components`` unit-variance bumps; dimension 2c."""

    def __init__(self, components: int, grid):
        if components < 1:
            raise DomainViolation("need at least one component")
        self.components = int(components)
        self.dimension = 2 * self.components
        self.grid = np.asarray(grid, dtype=float)

    def evaluate(self, xi) -> np.ndarray:
        return self.evaluate_on(xi, self.grid)

    def evaluate_on(self, xi, grid) -> np.ndarray:
        xi = validate_parameter_vector(xi, self.dimension)
        first, second = xi[0::2], xi[1::2]
        sums = first + second
        if np.any(sums == 0.0):
            raise DegeneratePair("component pair sums to zero")
        z = grid[:, None] - sums[None, :]
        return np.exp(-0.5 * z * z) @ (first / sums) * _INV_SQRT_2PI


class GammaMixtureModel:
    """Two unweighted Gamma densities; dimension 4, grid on t >= 0."""

    dimension = 4

    def __init__(self, grid):
        grid = np.asarray(grid, dtype=float)
        if np.any(grid < 0.0):
            raise DomainViolation("gamma mixture grid must be non-negative")
        self.grid = grid

    def evaluate(self, xi) -> np.ndarray:
        return self.evaluate_on(xi, self.grid)

    def evaluate_on(self, xi, grid) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (self.dimension,):
            raise DimensionMismatch("gamma mixture takes exactly 4 parameters")
        shapes, scales = xi[0::2], xi[1::2]
        if np.any(shapes <= 0.0) or np.any(scales <= 0.0):
            raise DomainViolation("shapes and scales must be positive")
        has_zero = np.any(grid == 0.0)
        if has_zero and np.any(shapes < 1.0):
            raise DomainViolation("gamma density diverges at t=0 for shape < 1")
        out = np.zeros_like(grid)
        positive = grid > 0.0
        tp = grid[positive]
        log_t = np.log(tp)
        for k, theta in zip(shapes, scales):
            log_pdf = (k - 1.0) * log_t - tp / theta - gammaln(k) - k * np.log(theta)
            out[positive] += np.exp(log_pdf)
            if has_zero and k == 1.0:
                out[grid == 0.0] += 1.0 / theta
        return out


class LinearSlopeModel:
    """R(xi, t) = xi[active] * t: the conjugate-oracle toy model."""

    def __init__(self, grid, dimension: int = 2, active: int = 0):
        self.grid = np.asarray(grid, dtype=float)
        self.dimension = int(dimension)
        if not 0 <= active < self.dimension:
            raise DimensionMismatch("active index out of range")
        self.active = int(active)

    def evaluate(self, xi) -> np.ndarray:
        return self.evaluate_on(xi, self.grid)

    def evaluate_on(self, xi, grid) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (self.dimension,):
            raise DimensionMismatch(f"expected {self.dimension} parameters")
        return xi[self.active] * grid


def uniform_grid(start: float, stop: float, n: int) -> np.ndarray:
    """n equally spaced points including both endpoints."""
    if n < 2:
        raise DomainViolation("a grid needs at least two points")
    return np.linspace(start, stop, n)
