"""Empirical Rényi functions and multifractal spectra of pixelized sky maps.

A map is shifted to be non-negative, summed over the cells of a dyadic mesh
and normalized to cell masses ``mu_l``. From these

    T_hat(q)     = log2(sum_l mu_l^q) / log2 |S|
    alpha_hat(q) = sum_l w_l(q) log2(mu_l) / log2 |S|,  w_l = mu_l^q / sum mu^q
    f_hat(q)     = q alpha_hat(q) - T_hat(q)

where ``|S|`` is the cell measure (normalized so the sphere has measure 1,
or in steradians with ``area="steradian"``). Cells with zero mass are left
out of every sum.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import EstimationError, GeometryError
from .models import RenyiCurve, SpectrumCurve
from .sphere import DyadicMesh, PixelGrid, Window, build_mesh, window_mask

__all__ = [
    "CellMasses",
    "SphericalMap",
    "cell_masses",
    "empirical_spectrum",
    "empirical_T",
    "empirical_T_multilevel",
    "preprocess_shift",
    "support_mask",
]

LN2 = np.log(2.0)


@dataclass(frozen=True)
class SphericalMap:
    """One value per pixel of ``grid``, in the grid's ordering."""

    grid: PixelGrid
    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.npix,):
            raise GeometryError(
                f"map has {values.size} values, grid nside={self.grid.nside} needs {self.grid.npix}")
        if not np.all(np.isfinite(values)):
            raise EstimationError("map values must be finite")
        object.__setattr__(self, "values", values)

    def reordered(self, ordering: str) -> "SphericalMap":
        """Same map with pixels permuted into ``ordering``."""
        from .sphere import nest2ring, ring2nest

        if ordering == self.grid.ordering:
            return self
        idx = np.arange(self.grid.npix)
        if ordering == "ring":
            values = self.values[ring2nest(self.grid.nside, idx)]
        else:
            values = self.values[nest2ring(self.grid.nside, idx)]
        return SphericalMap(self.grid.with_ordering(ordering), values, dict(self.meta))


@dataclass(frozen=True)
class CellMasses:
    """Normalized masses of the cells of ``mesh`` that lie inside the window.

    ``cell_sums`` are the raw pixel sums behind ``masses``; the estimators
    work from them so that T_hat(1) is exactly zero.
    """

    mesh: DyadicMesh
    masses: np.ndarray
    included: np.ndarray
    cell_sums: np.ndarray = field(repr=False)

    @property
    def cell_measure(self) -> float:
        return float(self.mesh.cell_measure)


def support_mask(mesh: DyadicMesh, window: Window) -> np.ndarray:
    """Pixel mask of the cells included by ``window``."""
    mask = np.zeros(mesh.grid.npix, dtype=bool)
    mask[mesh.pixels[window_mask(mesh, window)].ravel()] = True
    return mask


def preprocess_shift(sky: SphericalMap, support: np.ndarray | None = None) -> SphericalMap:
    """Subtract the minimum over ``support`` (default: every pixel)."""
    values = sky.values
    if support is None:
        low = values.min()
    else:
        support = np.asarray(support, dtype=bool)
        if not support.any():
            raise EstimationError("empty analysis support")
        low = values[support].min()
    return SphericalMap(sky.grid, values - low, dict(sky.meta))


def cell_masses(sky: SphericalMap, mesh: DyadicMesh, window: Window | None = None) -> CellMasses:
    if sky.grid != mesh.grid:
        raise GeometryError("map grid and mesh grid differ")
    included = window_mask(mesh, window or Window.full_sky())
    if not included.any():
        raise EstimationError("no mesh cell lies inside the window")
    sums = sky.values[mesh.pixels[included]].sum(axis=1)
    if np.any(sums < 0):
        raise EstimationError("negative cell mass; shift the map with preprocess_shift first")
    total = sums.sum()
    if not total > 0:
        raise EstimationError("map has zero total mass inside the window")
    return CellMasses(mesh, sums / total, included, sums)


def _log2_measure(masses: CellMasses, area: str) -> float:
    if area == "normalized":
        return float(np.log2(masses.mesh.cell_measure.numerator)
                     - np.log2(masses.mesh.cell_measure.denominator))
    if area == "steradian":
        return float(np.log2(masses.mesh.cell_area))
    raise ValueError(f"area must be 'normalized' or 'steradian', got {area!r}")


def _positive_log_sums(masses: CellMasses) -> np.ndarray:
    if masses.masses.size < 2:
        raise EstimationError("at least two cells are needed")
    sums = masses.cell_sums[masses.cell_sums > 0]
    if sums.size == 0:
        raise EstimationError("all cell masses are zero")
    ratio = sums / sums.max()
    # the ratio keeps power-of-two rescaling exact; fall back to logs where it underflows
    with np.errstate(divide="ignore"):
        return np.where(ratio > 0, np.log(ratio), np.log(sums) - np.log(sums.max()))


def _log_partition(log_m: np.ndarray, q: np.ndarray) -> np.ndarray:
    """ln sum_l mu_l^q from unnormalized log masses."""
    # same reduction path for both terms, so q = 1 cancels exactly
    log_total = logsumexp(log_m[None, :], axis=1)[0]
    return logsumexp(np.outer(q, log_m), axis=1) - q * log_total


def empirical_T(masses: CellMasses, q_grid, area: str = "normalized") -> RenyiCurve:
    """Single-level partition-sum estimate of the Rényi function."""
    q = np.atleast_1d(np.asarray(q_grid, dtype=float))
    log_m = _positive_log_sums(masses)
    T = _log_partition(log_m, q) / LN2 / _log2_measure(masses, area)
    return RenyiCurve(q, T, {"kind": "empirical", "cells": int(masses.masses.size),
                             "group_order": masses.mesh.group_order, "area": area})


def empirical_spectrum(masses: CellMasses, q_grid, mode: str = "default",
                       area: str = "normalized") -> SpectrumCurve:
    """Singularity exponents and spectrum from Boltzmann-weighted log-masses.

    ``mode="verbatim"`` keeps the mixed-base form (natural-log masses over a
    base-2 cell measure), which gives alpha_hat = ln 2 on a uniform map.
    """
    if mode not in ("default", "verbatim"):
        raise ValueError(f"mode must be 'default' or 'verbatim', got {mode!r}")
    q = np.atleast_1d(np.asarray(q_grid, dtype=float))
    log_m = _positive_log_sums(masses)
    log_mu = log_m - logsumexp(log_m)
    weights = np.exp(np.outer(q, log_mu) - logsumexp(np.outer(q, log_mu), axis=1, keepdims=True))
    numer = weights @ log_mu
    if mode == "default":
        numer = numer / LN2
    alpha = numer / _log2_measure(masses, area)
    T = empirical_T(masses, q, area).T
    f = q * alpha - T
    return SpectrumCurve(q, alpha, f, {"kind": "empirical", "mode": mode, "area": area})


def empirical_T_multilevel(sky: SphericalMap, group_orders, q_grid, window: Window | None = None,
                           area: str = "normalized") -> RenyiCurve:
    """Slope of log2 sum mu^q against log2 |S| across several mesh levels.

    Optional refinement of :func:`empirical_T`; the map must already be
    non-negative over the window.
    """
    orders = sorted(set(int(j) for j in group_orders))
    if len(orders) < 2:
        raise EstimationError("multi-level regression needs at least two group orders")
    q = np.atleast_1d(np.asarray(q_grid, dtype=float))
    xs, ys = [], []
    for j in orders:
        cm = cell_masses(sky, build_mesh(sky.grid, j), window)
        xs.append(_log2_measure(cm, area))
        ys.append(_log_partition(_positive_log_sums(cm), q) / LN2)
    x = np.asarray(xs)
    y = np.asarray(ys)
    xc = x - x.mean()
    slope = (xc @ (y - y.mean(axis=0))) / (xc @ xc)
    return RenyiCurve(q, slope, {"kind": "empirical", "group_orders": orders, "area": area})
