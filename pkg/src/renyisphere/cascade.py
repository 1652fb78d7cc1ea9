"""Finite-product multiplicative cascades on the sphere.

Level ``i`` of the cascade is an independent copy of the mother field
evaluated at the modularly scaled pixel centers ``b**i x``; the map is the
pointwise product over levels ``0..levels``. Each level draws a Gaussian
vector with exponential covariance ``variance * exp(-gamma * chord)`` at its
own scaled points by dense Cholesky factorization, so sizes are limited to a
few thousand pixels (nside <= 16 in practice).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import DomainError, SimulationError
from .estimator import SphericalMap
from .models import Family, ModelSpec
from .specfun import RandomStream
from .sphere import PixelGrid, SkyCoord, pixel_center, scale_coord, to_unit_vectors

__all__ = [
    "CascadeConfig",
    "CovarianceSpec",
    "SIMULABLE",
    "mother_transform",
    "simulate_cascade",
    "simulate_gaussian_on_points",
]

log = logging.getLogger(__name__)

SIMULABLE = (Family.LOGNORMAL, Family.CHISQUARE, Family.CHISQUAREEPS, Family.EVENPOWER,
             Family.CHISQUAREK)
MAX_POINTS = 20000
JITTER_START = 1e-12
JITTER_MAX = 1e-6


@dataclass(frozen=True)
class CovarianceSpec:
    """Exponential covariance ``variance * exp(-gamma * r)`` in chordal distance ``r``."""

    gamma: float = 1.0
    variance: float = 1.0
    kind: str = "exponential"

    def __post_init__(self):
        if self.kind != "exponential":
            raise DomainError(f"unsupported covariance kind {self.kind!r}")
        if not self.gamma > 0 or not self.variance > 0:
            raise DomainError("covariance gamma and variance must be positive")

    def __call__(self, r):
        return self.variance * np.exp(-self.gamma * np.asarray(r, dtype=float))


@dataclass(frozen=True)
class CascadeConfig:
    mother: ModelSpec
    covariance: CovarianceSpec
    levels: int
    grid: PixelGrid = field(default_factory=lambda: PixelGrid(16))
    seed: int = 0

    def __post_init__(self):
        if int(self.levels) != self.levels or self.levels < 0:
            raise DomainError("levels must be a non-negative integer")
        if self.mother.family not in SIMULABLE:
            raise DomainError(f"{self.mother.family} mother fields cannot be simulated")
        if self.mother.verbatim:
            raise DomainError("cascade simulation needs a mean-one mother; use verbatim=False")
        if self.mother.family in (Family.EVENPOWER, Family.CHISQUAREK) and self.mother.k != int(self.mother.k):
            raise DomainError("simulation requires an integer k")
        _check_variance(self.mother, self.covariance.variance)

    @property
    def b(self) -> float:
        return self.mother.b


def _check_variance(spec: ModelSpec, variance: float) -> None:
    expected = spec.gaussian_variance
    if not np.isclose(variance, expected, rtol=1e-12, atol=0.0):
        raise DomainError(
            f"covariance variance {variance} does not match the {spec.family} mother ({expected})")


def _unique_points(vectors: np.ndarray):
    uniq, inverse = np.unique(vectors, axis=0, return_inverse=True)
    return uniq, inverse.reshape(-1)


def _factor(vectors: np.ndarray, cov: CovarianceSpec) -> tuple[np.ndarray, float]:
    gram = vectors @ vectors.T
    # chord^2 = 2 - 2 <u, v> for unit vectors
    np.multiply(gram, -2.0, out=gram)
    gram += 2.0
    np.maximum(gram, 0.0, out=gram)
    np.sqrt(gram, out=gram)
    gram *= -cov.gamma
    np.exp(gram, out=gram)
    gram *= cov.variance
    n = len(vectors)
    jitter = JITTER_START
    diag = np.diag_indices(n)
    base = gram[diag].copy()
    while jitter <= JITTER_MAX * (1 + 1e-9):
        gram[diag] = base + jitter * cov.variance
        try:
            factor = linalg.cholesky(gram, lower=True, check_finite=False)
            return factor, jitter
        except linalg.LinAlgError:
            jitter *= 10.0
    raise SimulationError("covariance matrix not positive definite even with maximal jitter")


def simulate_gaussian_on_points(points: SkyCoord, cov: CovarianceSpec, stream: RandomStream,
                                columns: int = 1, info: dict | None = None) -> np.ndarray:
    """One zero-mean Gaussian draw at ``points`` (``columns`` independent draws if > 1).

    Exactly coincident points receive identical values. If ``info`` is given
    it receives the jitter used and the number of distinct points.
    """
    vectors = to_unit_vectors(points).reshape(-1, 3)
    n = len(vectors)
    if n < 1:
        raise SimulationError("no points to simulate")
    if n > MAX_POINTS:
        raise SimulationError(f"{n} points exceed the dense-Cholesky limit of {MAX_POINTS}")
    uniq, inverse = _unique_points(vectors)
    factor, jitter = _factor(uniq, cov)
    z = stream.generator.standard_normal((len(uniq), columns))
    values = (factor @ z)[inverse]
    if info is not None:
        info.update(jitter=jitter, distinct=len(uniq))
    return values[:, 0] if columns == 1 else values.T


def mother_transform(spec: ModelSpec, gaussian_values, variance: float | None = None) -> np.ndarray:
    """Map Gaussian values to mean-one mother-field values.

    ``chisquarek`` expects an array of shape ``(k, n)`` holding k independent
    Gaussian layers; the other families take a flat array.
    """
    if spec.family not in SIMULABLE:
        raise DomainError(f"{spec.family} has no Gaussian construction")
    if variance is not None:
        _check_variance(spec, variance)
    y = np.asarray(gaussian_values, dtype=float)
    fam = spec.family
    if fam is Family.LOGNORMAL:
        return np.exp(y - 0.5 * spec.sigma2_Y)
    if fam is Family.CHISQUARE:
        return y * y
    if fam is Family.CHISQUAREEPS:
        return (1.0 - spec.eps) * y * y + spec.eps
    if fam is Family.EVENPOWER:
        return y ** (2 * int(spec.k))
    if fam is Family.CHISQUAREK:
        k = int(spec.k)
        if y.ndim != 2 or y.shape[0] != k:
            raise DomainError(f"chisquarek needs {k} Gaussian layers of equal length")
        return (y * y).sum(axis=0) / k
    raise AssertionError(fam)


def simulate_cascade(config: CascadeConfig) -> SphericalMap:
    """Simulate the finite-product field on the pixel centers of ``config.grid``."""
    grid = config.grid
    centers = pixel_center(grid, np.arange(grid.npix))
    layers = int(config.mother.k) if config.mother.family is Family.CHISQUAREK else 1
    streams = RandomStream(config.seed).spawn(config.levels + 1)
    product = np.ones(grid.npix)
    max_jitter = 0.0
    for level, stream in enumerate(streams):
        scaled = scale_coord(centers, config.b**level)
        info: dict = {}
        y = simulate_gaussian_on_points(scaled, config.covariance, stream, columns=layers, info=info)
        product *= mother_transform(config.mother, y)
        max_jitter = max(max_jitter, info["jitter"])
        log.debug("level %d: %d distinct points, jitter %.1e", level, info["distinct"], info["jitter"])
    meta = {
        "source": "cascade",
        "model": config.mother.describe(),
        "covariance": {"kind": config.covariance.kind, "gamma": config.covariance.gamma,
                       "variance": config.covariance.variance},
        "levels": config.levels,
        "seed": config.seed,
        "max_jitter": max_jitter,
    }
    return SphericalMap(grid, product, meta)
