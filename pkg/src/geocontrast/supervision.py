"""Spatial soft-label construction for contrastive training.

Targets for each anchor are spread over nearby samples instead of being
concentrated on the anchor itself: a Gaussian distance-decay kernel with
a strict cutoff is modulated by a hierarchical prior that boosts pairs
sharing a street or a city, and each row is normalized to a probability
distribution.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Sample
from .errors import InvalidInputError
from .geodesy import DistanceMatrix


@dataclass(frozen=True)
class KernelConfig:
    """Parameters of the spatial weighting kernel.

    sigma: Gaussian decay lengthscale in meters.
    d_cut: strict cutoff in meters; pairs at or beyond it get zero weight.
    alpha_street: additive boost for same-street pairs.
    beta_city: additive boost for same-city pairs.
    """

    sigma: float = 150.0
    d_cut: float = 1000.0
    alpha_street: float = 0.5
    beta_city: float = 0.25

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise InvalidInputError(f"sigma must be > 0, got {self.sigma}")
        if not self.d_cut > 0:
            raise InvalidInputError(f"d_cut must be > 0, got {self.d_cut}")
        if self.alpha_street < 0 or self.beta_city < 0:
            raise InvalidInputError("hierarchy boosts must be >= 0")


@dataclass(frozen=True)
class SpatialWeightMatrix:
    """Row-stochastic target matrix for one batch."""

    values: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]


def local_kernel(d: DistanceMatrix, cfg: KernelConfig) -> np.ndarray:
    """Gaussian decay exp(-d^2 / (2 sigma^2)) zeroed at and beyond d_cut.

    The diagonal is exactly 1: each anchor is at zero distance from
    itself.
    """
    k = np.exp(-(d.values**2) / (2.0 * cfg.sigma**2))
    k[d.values >= cfg.d_cut] = 0.0
    return k


def hierarchical_prior(samples: list[Sample], cfg: KernelConfig) -> np.ndarray:
    """Multiplicative boost matrix 1 + alpha*[same street] + beta*[same city].

    Street equality only counts within the same city: street names are
    compared jointly with the city so identically named streets in
    different cities do not match. Diagonal entries are 1 + alpha + beta.
    """
    if not samples:
        raise InvalidInputError("hierarchical_prior needs at least one sample")
    for s in samples:
        if not s.street or not s.city:
            raise InvalidInputError(f"sample {s.id!r} is missing street/city labels")
    streets = [(s.city, s.street) for s in samples]
    cities = [s.city for s in samples]
    same_street = np.array(
        [[a == b for b in streets] for a in streets], dtype=np.float64
    )
    same_city = np.array([[a == b for b in cities] for a in cities], dtype=np.float64)
    return 1.0 + cfg.alpha_street * same_street + cfg.beta_city * same_city


def soft_labels(
    d: DistanceMatrix, samples: list[Sample], cfg: KernelConfig
) -> SpatialWeightMatrix:
    """Combine kernel and prior into a row-stochastic target matrix.

    Each row of kernel*prior is divided by its sum. The diagonal entry of
    the unnormalized product is (1 + alpha + beta) > 0, so every row sum
    is positive and normalization is always well defined.
    """
    if d.n != len(samples):
        raise InvalidInputError(
            f"distance matrix is {d.n}x{d.n} but got {len(samples)} samples"
        )
    raw = local_kernel(d, cfg) * hierarchical_prior(samples, cfg)
    w = raw / raw.sum(axis=1, keepdims=True)
    return SpatialWeightMatrix(values=w)


def identity_labels(n: int) -> SpatialWeightMatrix:
    """Hard one-hot targets: each anchor matches only itself."""
    if n < 1:
        raise InvalidInputError(f"need n >= 1, got {n}")
    return SpatialWeightMatrix(values=np.eye(n))
