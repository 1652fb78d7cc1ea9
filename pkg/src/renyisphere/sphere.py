"""Equal-area HEALPix pixelization, dyadic cell meshes and sky windows.

Pixel indexing follows the standard HEALPix scheme (Gorski et al. 2005) in
both the ``nested`` and ``ring`` orderings. Everything is vectorized over
pixel indices and coordinate arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .errors import GeometryError

__all__ = [
    "DyadicMesh",
    "PixelGrid",
    "SkyCoord",
    "Window",
    "ang2pix",
    "build_mesh",
    "chordal_distance",
    "nest2ring",
    "pixel_center",
    "ring2nest",
    "scale_coord",
    "to_unit_vectors",
    "window_mask",
]

_JRLL = np.array([2, 2, 2, 2, 3, 3, 3, 3, 4, 4, 4, 4], dtype=np.int64)
_JPLL = np.array([1, 3, 5, 7, 0, 2, 4, 6, 1, 3, 5, 7], dtype=np.int64)

ORDERINGS = ("nested", "ring")


class SkyCoord(NamedTuple):
    """Colatitude ``theta`` in [0, pi] and longitude ``phi`` in [0, 2 pi).

    Both fields may be scalars or equally shaped arrays.
    """

    theta: np.ndarray | float
    phi: np.ndarray | float

    def validate(self) -> "SkyCoord":
        theta = np.asarray(self.theta, dtype=float)
        phi = np.asarray(self.phi, dtype=float)
        if np.any((theta < 0) | (theta > np.pi)) or np.any((phi < 0) | (phi >= 2 * np.pi)):
            raise GeometryError("coordinates outside theta in [0, pi], phi in [0, 2pi)")
        return self


@dataclass(frozen=True)
class PixelGrid:
    nside: int
    ordering: str = "nested"

    def __post_init__(self):
        nside = int(self.nside)
        if nside < 1 or nside & (nside - 1):
            raise GeometryError(f"nside must be a positive power of two, got {self.nside}")
        if self.ordering not in ORDERINGS:
            raise GeometryError(f"ordering must be 'nested' or 'ring', got {self.ordering!r}")
        object.__setattr__(self, "nside", nside)

    @property
    def npix(self) -> int:
        return 12 * self.nside * self.nside

    @property
    def order(self) -> int:
        return self.nside.bit_length() - 1

    @property
    def pixel_area(self) -> float:
        """Solid angle of one pixel in steradians."""
        return 4.0 * np.pi / self.npix

    def with_ordering(self, ordering: str) -> "PixelGrid":
        return PixelGrid(self.nside, ordering)


# ---------------------------------------------------------------------------
# index arithmetic

def _check_index(nside: int, ipix) -> np.ndarray:
    ipix = np.asarray(ipix)
    if ipix.dtype.kind not in "iu":
        if np.any(ipix != np.floor(ipix)):
            raise GeometryError("pixel indices must be integers")
    ipix = ipix.astype(np.int64)
    if np.any((ipix < 0) | (ipix >= 12 * nside * nside)):
        raise GeometryError(f"pixel index out of range for nside={nside}")
    return ipix


def _spread_bits(v: np.ndarray) -> np.ndarray:
    v = v.astype(np.uint64)
    out = np.zeros_like(v)
    for bit in range(30):
        out |= ((v >> np.uint64(bit)) & np.uint64(1)) << np.uint64(2 * bit)
    return out.astype(np.int64)


def _compress_bits(v: np.ndarray) -> np.ndarray:
    v = v.astype(np.uint64)
    out = np.zeros_like(v)
    for bit in range(30):
        out |= ((v >> np.uint64(2 * bit)) & np.uint64(1)) << np.uint64(bit)
    return out.astype(np.int64)


def _nest2xyf(nside, ipix):
    order = nside.bit_length() - 1
    face = ipix >> (2 * order)
    ipf = ipix & (nside * nside - 1)
    return _compress_bits(ipf), _compress_bits(ipf >> 1), face


def _xyf2nest(nside, ix, iy, face):
    order = nside.bit_length() - 1
    return (face << (2 * order)) + _spread_bits(ix) + (_spread_bits(iy) << 1)


def _ring_info(nside, ipix):
    """Ring number (1..4 nside-1), in-ring index (1-based) and shift flag."""
    npix = 12 * nside * nside
    ncap = 2 * nside * (nside - 1)
    nl4 = 4 * nside

    north = ipix < ncap
    south = ipix >= npix - ncap
    belt = ~(north | south)

    iring = np.empty_like(ipix)
    iphi = np.empty_like(ipix)
    kshift = np.zeros_like(ipix)
    nr = np.empty_like(ipix)

    p = ipix[north]
    r = (1 + _isqrt(1 + 2 * p)) >> 1
    iring[north] = r
    iphi[north] = p + 1 - 2 * r * (r - 1)
    nr[north] = r

    p = ipix[belt] - ncap
    tmp = p // nl4
    iring[belt] = tmp + nside
    iphi[belt] = p - tmp * nl4 + 1
    kshift[belt] = (tmp + 2 * nside) & 1  # (iring + nside) & 1
    nr[belt] = nside

    p = npix - ipix[south]
    r = (1 + _isqrt(2 * p - 1)) >> 1
    iphi[south] = 4 * r + 1 - (p - 2 * r * (r - 1))
    nr[south] = r
    iring[south] = 4 * nside - r
    return iring, iphi, kshift, nr, north, belt, south


def _isqrt(v: np.ndarray) -> np.ndarray:
    r = np.floor(np.sqrt(v.astype(float))).astype(np.int64)
    r -= (r * r > v)
    r += ((r + 1) * (r + 1) <= v)
    return r


def _ring2xyf(nside, ipix):
    nl2 = 2 * nside
    iring, iphi, kshift, nr, north, belt, south = _ring_info(nside, ipix)
    face = np.empty_like(ipix)
    face[north] = (iphi[north] - 1) // nr[north]
    face[south] = 8 + (iphi[south] - 1) // nr[south]

    ire = iring[belt] - nside + 1
    irm = nl2 + 2 - ire
    ph = iphi[belt]
    ifm = (ph - ire // 2 + nside - 1) // nside
    ifp = (ph - irm // 2 + nside - 1) // nside
    face[belt] = np.where(ifp == ifm, ifp | 4, np.where(ifp < ifm, ifp, ifm + 8))

    irt = iring - _JRLL[face] * nside + 1
    ipt = 2 * iphi - _JPLL[face] * nr - kshift - 1
    ipt = np.where(ipt >= nl2, ipt - 8 * nside, ipt)
    ix = (ipt - irt) >> 1
    iy = (-ipt - irt) >> 1
    return ix, iy, face


def _xyf2ring(nside, ix, iy, face):
    npix = 12 * nside * nside
    ncap = 2 * nside * (nside - 1)
    nl4 = 4 * nside
    jr = _JRLL[face] * nside - ix - iy - 1

    nr = np.where(jr < nside, jr, np.where(jr > 3 * nside, nl4 - jr, nside))
    n_before = np.where(
        jr < nside,
        2 * nr * (nr - 1),
        np.where(jr > 3 * nside, npix - 2 * (nr + 1) * nr, ncap + (jr - nside) * nl4),
    )
    kshift = np.where((jr >= nside) & (jr <= 3 * nside), (jr - nside) & 1, 0)
    jp = (_JPLL[face] * nr + ix - iy + 1 + kshift) // 2
    jp = np.where(jp > nl4, jp - nl4, jp)
    jp = np.where(jp < 1, jp + nl4, jp)
    return n_before + jp - 1


def nest2ring(nside: int, ipix):
    """Convert nested pixel indices to ring indices."""
    nside = PixelGrid(nside).nside
    ipix = _check_index(nside, ipix)
    shape = ipix.shape
    ix, iy, face = _nest2xyf(nside, ipix.ravel())
    return _xyf2ring(nside, ix, iy, face).reshape(shape)


def ring2nest(nside: int, ipix):
    """Convert ring pixel indices to nested indices."""
    nside = PixelGrid(nside).nside
    ipix = _check_index(nside, ipix)
    shape = ipix.shape
    ix, iy, face = _ring2xyf(nside, ipix.ravel())
    return _xyf2nest(nside, ix, iy, face).reshape(shape)


def _ring_pix2ang(nside, ipix):
    npix = 12 * nside * nside
    iring, iphi, _, _, north, belt, south = _ring_info(nside, ipix)
    z = np.empty(ipix.shape, dtype=float)
    phi = np.empty(ipix.shape, dtype=float)
    fact2 = 4.0 / npix
    fact1 = 2.0 * nside * fact2

    r = iring[north]
    z[north] = 1.0 - r * r * fact2
    phi[north] = (iphi[north] - 0.5) * (np.pi / 2) / r

    r = iring[belt]
    fodd = np.where((r + nside) & 1, 1.0, 0.5)
    z[belt] = (2 * nside - r) * fact1
    phi[belt] = (iphi[belt] - fodd) * (np.pi / 2) / nside

    r = 4 * nside - iring[south]
    z[south] = -1.0 + r * r * fact2
    phi[south] = (iphi[south] - 0.5) * (np.pi / 2) / r
    return np.arccos(np.clip(z, -1.0, 1.0)), phi


def pixel_center(grid: PixelGrid, index) -> SkyCoord:
    """Center of each pixel in ``index`` (scalar or array) on ``grid``."""
    ipix = _check_index(grid.nside, index)
    scalar = ipix.ndim == 0
    ring = ipix.ravel()
    if grid.ordering == "nested":
        ix, iy, face = _nest2xyf(grid.nside, ring)
        ring = _xyf2ring(grid.nside, ix, iy, face)
    theta, phi = _ring_pix2ang(grid.nside, ring)
    if scalar:
        return SkyCoord(float(theta[0]), float(phi[0]))
    return SkyCoord(theta.reshape(ipix.shape), phi.reshape(ipix.shape))


def ang2pix(grid: PixelGrid, coord: SkyCoord):
    """Index of the pixel containing each coordinate."""
    theta = np.asarray(coord.theta, dtype=float)
    phi = np.asarray(coord.phi, dtype=float)
    scalar = theta.ndim == 0 and phi.ndim == 0
    theta, phi = np.broadcast_arrays(np.atleast_1d(theta), np.atleast_1d(phi))
    shape = theta.shape
    theta, phi = theta.ravel(), phi.ravel()

    nside = grid.nside
    npix = grid.npix
    ncap = 2 * nside * (nside - 1)
    z = np.cos(theta)
    za = np.abs(z)
    tt = np.mod(phi, 2 * np.pi) / (np.pi / 2)
    tt = np.where(tt >= 4.0, 0.0, tt)
    pix = np.empty(theta.shape, dtype=np.int64)

    eq = za <= 2.0 / 3.0
    t1 = nside * (0.5 + tt[eq])
    t2 = nside * z[eq] * 0.75
    jp = np.floor(t1 - t2).astype(np.int64)
    jm = np.floor(t1 + t2).astype(np.int64)
    ir = nside + 1 + jp - jm
    kshift = 1 - (ir & 1)
    ip = (jp + jm - nside + kshift + 1) // 2
    ip = np.mod(ip, 4 * nside)
    pix[eq] = ncap + (ir - 1) * 4 * nside + ip

    cap = ~eq
    ttc = tt[cap]
    tp = ttc - np.floor(ttc)
    tmp = nside * np.sqrt(3.0 * (1.0 - za[cap]))
    jp = np.floor(tp * tmp).astype(np.int64)
    jm = np.floor((1.0 - tp) * tmp).astype(np.int64)
    ir = jp + jm + 1
    ip = np.floor(ttc * ir).astype(np.int64)
    ip = np.mod(ip, 4 * ir)
    pix[cap] = np.where(z[cap] > 0, 2 * ir * (ir - 1) + ip, npix - 2 * ir * (ir + 1) + ip)

    if grid.ordering == "nested":
        ix, iy, face = _ring2xyf(nside, pix)
        pix = _xyf2nest(nside, ix, iy, face)
    pix = pix.reshape(shape)
    return int(pix[0]) if scalar else pix


# ---------------------------------------------------------------------------
# coordinate helpers

def to_unit_vectors(coord: SkyCoord) -> np.ndarray:
    """Cartesian unit vectors, shape ``(..., 3)``."""
    theta = np.asarray(coord.theta, dtype=float)
    phi = np.asarray(coord.phi, dtype=float)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def chordal_distance(a: SkyCoord, b: SkyCoord):
    """Euclidean distance 2 sin(Theta/2) between points on the unit sphere."""
    ta, pa = np.asarray(a.theta, float), np.asarray(a.phi, float)
    tb, pb = np.asarray(b.theta, float), np.asarray(b.phi, float)
    # haversine form stays accurate for nearly coincident points
    h = np.sin((ta - tb) / 2) ** 2 + np.sin(ta) * np.sin(tb) * np.sin((pa - pb) / 2) ** 2
    d = 2.0 * np.sqrt(np.clip(h, 0.0, 1.0))
    return float(d) if d.ndim == 0 else d


def scale_coord(x: SkyCoord, factor: float) -> SkyCoord:
    """Modular scaling ``(factor*theta mod pi, factor*phi mod 2pi)``."""
    if not factor > 0:
        raise GeometryError("scale factor must be positive")
    theta = np.mod(factor * np.asarray(x.theta, float), np.pi)
    phi = np.mod(factor * np.asarray(x.phi, float), 2 * np.pi)
    # fmod rounding can land exactly on the excluded upper bound
    phi = np.where(phi >= 2 * np.pi, 0.0, phi)
    if theta.ndim == 0:
        return SkyCoord(float(theta), float(phi))
    return SkyCoord(theta, phi)


# ---------------------------------------------------------------------------
# windows and meshes

@dataclass(frozen=True)
class Window:
    """Full sky or a spherical cap of angular ``radius`` around ``center``."""

    kind: str = "full"
    center: SkyCoord | None = None
    radius: float | None = None

    def __post_init__(self):
        if self.kind == "full":
            return
        if self.kind != "cap":
            raise GeometryError(f"unknown window kind {self.kind!r}")
        if self.center is None or self.radius is None:
            raise GeometryError("cap window needs a center and a radius")
        if not 0 < self.radius <= np.pi:
            raise GeometryError("cap radius must lie in (0, pi]")
        object.__setattr__(self, "center", SkyCoord(float(self.center[0]), float(self.center[1])).validate())
        object.__setattr__(self, "radius", float(self.radius))

    @classmethod
    def full_sky(cls) -> "Window":
        return cls("full")

    @classmethod
    def cap(cls, center: SkyCoord | tuple[float, float], radius: float) -> "Window":
        return cls("cap", SkyCoord(*center), radius)

    @classmethod
    def cap_from_area(cls, center: SkyCoord | tuple[float, float], area: float) -> "Window":
        """Cap enclosing ``area`` steradians: radius = arccos(1 - area / 2pi)."""
        if not 0 < area <= 4 * np.pi:
            raise GeometryError("cap area must lie in (0, 4pi] steradians")
        return cls.cap(center, float(np.arccos(1.0 - area / (2 * np.pi))))

    @property
    def area(self) -> float:
        if self.kind == "full":
            return 4 * np.pi
        return 2 * np.pi * (1.0 - np.cos(self.radius))

    def contains(self, coord: SkyCoord) -> np.ndarray:
        theta = np.asarray(coord.theta, float)
        if self.kind == "full" or self.radius >= np.pi:
            return np.ones(theta.shape, dtype=bool)
        # compare in angle space, chord = 2 sin(angle / 2)
        angle = 2.0 * np.arcsin(np.clip(chordal_distance(coord, self.center) / 2.0, 0.0, 1.0))
        return np.asarray(angle <= self.radius)


@dataclass(frozen=True)
class DyadicMesh:
    """Partition of a grid into cells of ``4**group_order`` nested-consecutive pixels.

    Each cell is one pixel of the coarser grid ``nside / 2**group_order``.
    """

    grid: PixelGrid
    group_order: int
    pixels: np.ndarray = field(repr=False, compare=False)

    @property
    def pixels_per_cell(self) -> int:
        return 4**self.group_order

    @property
    def cell_count(self) -> int:
        return self.grid.npix // self.pixels_per_cell

    @property
    def cell_measure(self) -> Fraction:
        """Normalized cell area, so the sphere has total measure 1."""
        return Fraction(self.pixels_per_cell, self.grid.npix)

    @property
    def cell_area(self) -> float:
        """Cell area in steradians."""
        return 4 * np.pi * float(self.cell_measure)


def build_mesh(grid: PixelGrid, group_order: int) -> DyadicMesh:
    """Group the pixels of ``grid`` into equal-area cells of ``4**group_order`` pixels.

    ``pixels[l]`` holds the indices (in the grid's own ordering) of cell ``l``.
    """
    j = int(group_order)
    if j != group_order or j < 0:
        raise GeometryError("group order must be a non-negative integer")
    per_cell = 4**j
    if per_cell > grid.nside**2 or grid.npix % per_cell:
        raise GeometryError(f"group order {j} too large for nside={grid.nside}")
    nested = np.arange(grid.npix, dtype=np.int64)
    if grid.ordering == "ring":
        nested = nest2ring(grid.nside, nested)
    pixels = nested.reshape(grid.npix // per_cell, per_cell)
    pixels.setflags(write=False)
    return DyadicMesh(grid, j, pixels)


def window_mask(mesh: DyadicMesh, window: Window) -> np.ndarray:
    """Cells whose pixel centers all lie inside ``window``."""
    if window.kind == "full" or window.radius >= np.pi:
        return np.ones(mesh.cell_count, dtype=bool)
    # row l of the mesh is nested coarse pixel l; prefilter on coarse centers;
    # 3 cell widths bound any pixel's offset from its cell center
    coarse = PixelGrid(mesh.grid.nside >> mesh.group_order, "nested")
    cell_centers = pixel_center(coarse, np.arange(mesh.cell_count))
    width = np.sqrt(mesh.cell_area)
    near = Window.cap(window.center, min(window.radius + 3 * width, np.pi)).contains(cell_centers)
    mask = np.zeros(mesh.cell_count, dtype=bool)
    rows = np.flatnonzero(near)
    if rows.size:
        mask[rows] = window.contains(pixel_center(mesh.grid, mesh.pixels[rows])).all(axis=1)
    return mask
