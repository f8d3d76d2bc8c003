"""Reparameterization of non-negative parameter vectors.

A parameter vector ``xi`` of even length D is split into a bounded block
``eta`` (length d = D/2) and an unbounded block ``nu`` (length D - d).
Three pairings are supported:

* ``weight_sum``      -- eta_i = xi[2i] / (xi[2i] + xi[2i+1]),
                         nu_i = xi[2i] + xi[2i+1]
                         (mixture weights and component locations)
* ``shape_scale``     -- eta_i = xi[2i+1], nu_i = xi[2i]
                         (bounded scales, free shapes)
* ``chroma_ratio_sum``-- same arithmetic as weight_sum, applied to the
                         (site-I, site-II) pairs of an isotherm block:
                         eta = (a ratio, b ratio), nu = (a sum, b sum)

All maps are bijections on their domain: ``restore(*split(xi)) == xi``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePair, DimensionMismatch, DomainViolation

RATIO_KINDS = ("weight_sum", "chroma_ratio_sum")
KINDS = ("weight_sum", "shape_scale", "chroma_ratio_sum")

SORT_RULES = ("none", "sort_ascending", "swap_smaller_first")


@dataclass(frozen=True)
class ReparamMap:
    """A fixed pairing of a D-dimensional vector into (eta, nu) blocks."""

    kind: str
    dimension: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown reparam kind {self.kind!r}")
        if self.dimension < 2 or self.dimension % 2:
            raise DimensionMismatch(
                f"pair-based maps need an even dimension >= 2, got {self.dimension}"
            )

    @property
    def bounded_dim(self) -> int:
        """Length d of the eta block."""
        return self.dimension // 2

    @property
    def free_dim(self) -> int:
        """Length D - d of the nu block."""
        return self.dimension - self.bounded_dim

    @property
    def is_ratio(self) -> bool:
        """True when eta entries are ratios confined to [0, 1]."""
        return self.kind in RATIO_KINDS

    def split(self, xi) -> tuple[np.ndarray, np.ndarray]:
        """Decompose ``xi`` into (eta, nu)."""
        xi = _check_xi(xi, self.dimension)
        first, second = xi[0::2], xi[1::2]
        if self.kind == "shape_scale":
            return second.copy(), first.copy()
        sums = first + second
        if np.any(sums == 0.0):
            raise DegeneratePair("a coordinate pair sums to zero; ratio undefined")
        return first / sums, sums

    def restore(self, eta, nu) -> np.ndarray:
        """Inverse of :meth:`split`."""
        eta = np.asarray(eta, dtype=float)
        nu = np.asarray(nu, dtype=float)
        if eta.shape != (self.bounded_dim,) or nu.shape != (self.free_dim,):
            raise DimensionMismatch(
                f"expected eta of length {self.bounded_dim} and nu of length "
                f"{self.free_dim}, got {eta.shape} and {nu.shape}"
            )
        xi = np.empty(self.dimension)
        if self.kind == "shape_scale":
            xi[0::2], xi[1::2] = nu, eta
            return xi
        if np.any((eta < 0.0) | (eta > 1.0)):
            raise DomainViolation("ratio-type eta entries must lie in [0, 1]")
        xi[0::2] = eta * nu
        xi[1::2] = (1.0 - eta) * nu
        return xi


def validate_parameter_vector(xi, dimension: int | None = None) -> np.ndarray:
    """Check finiteness, non-negativity and (optionally) the length of ``xi``."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if dimension is not None and xi.shape != (dimension,):
        raise DimensionMismatch(f"expected length {dimension}, got shape {xi.shape}")
    if not np.all(np.isfinite(xi)):
        raise DomainViolation("parameter vector has non-finite entries")
    if np.any(xi < 0.0):
        raise DomainViolation("parameter vector has negative entries")
    return xi


def apply_sort_rule(rule: str, eta, nu) -> tuple[np.ndarray, np.ndarray]:
    """Reorder (eta_i, nu_i) pairs according to ``rule``.

    ``sort_ascending`` and ``swap_smaller_first`` both order the pairs by
    ascending eta (the latter is the two-component special case and is kept
    as a separate name so run configurations stay auditable); ``none``
    returns the inputs unchanged.  nu always follows eta's permutation so
    the implied xi pairs stay intact.
    """
    if rule not in SORT_RULES:
        raise ValueError(f"unknown sort rule {rule!r}")
    eta = np.asarray(eta, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if eta.shape != nu.shape:
        raise DimensionMismatch("eta and nu must have one entry per pair")
    if rule == "none":
        return eta.copy(), nu.copy()
    order = np.argsort(eta, kind="stable")
    return eta[order], nu[order]


def to_unconstrained(eta, nu) -> tuple[np.ndarray, np.ndarray]:
    """Map eta in (0,1) and nu > 0 onto the real line, element-wise.

    Inverse of ``eta = (tanh(eta_t) + 1)/2`` and ``nu = exp(nu_t)``.
    """
    eta = np.asarray(eta, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if np.any((eta <= 0.0) | (eta >= 1.0)):
        raise DomainViolation("transform undefined for eta at or outside {0, 1}")
    if np.any(nu <= 0.0):
        raise DomainViolation("transform undefined for non-positive nu")
    return np.arctanh(2.0 * eta - 1.0), np.log(nu)


def from_unconstrained(eta_t, nu_t) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`to_unconstrained`; accepts any finite reals."""
    eta_t = np.asarray(eta_t, dtype=float)
    nu_t = np.asarray(nu_t, dtype=float)
    if not (np.all(np.isfinite(eta_t)) and np.all(np.isfinite(nu_t))):
        raise DomainViolation("unconstrained coordinates must be finite")
    return 0.5 * (np.tanh(eta_t) + 1.0), np.exp(nu_t)


def _check_xi(xi, dimension: int) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (dimension,):
        raise DimensionMismatch(f"expected length {dimension}, got shape {xi.shape}")
    return xi
