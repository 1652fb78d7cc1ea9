import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from renyisphere.errors import EstimationError, GeometryError
from renyisphere.estimator import (SphericalMap, cell_masses, empirical_spectrum, empirical_T,
                                   empirical_T_multilevel, preprocess_shift, support_mask)
from renyisphere.sphere import PixelGrid, Window, build_mesh

GRID = PixelGrid(4)
Q = np.round(np.arange(0.1, 3.0001, 0.1), 12)


def test_map_validation():
    with pytest.raises(GeometryError):
        SphericalMap(GRID, np.ones(10))
    with pytest.raises(EstimationError):
        SphericalMap(GRID, np.full(GRID.npix, np.nan))


def test_preprocess_examples():
    g = PixelGrid(1)
    vals = np.zeros(12)
    vals[:3] = [-2, 0, 3]
    shifted = preprocess_shift(SphericalMap(g, vals))
    assert list(shifted.values[:3]) == [0, 2, 5]
    same = preprocess_shift(SphericalMap(g, np.arange(12.0)))
    assert np.array_equal(same.values, np.arange(12.0))
    flat = preprocess_shift(SphericalMap(g, np.full(12, 4.0)))
    assert not flat.values.any()
    with pytest.raises(EstimationError):
        cell_masses(flat, build_mesh(g, 0))


def test_shift_over_window_support():
    grid = PixelGrid(8)
    mesh = build_mesh(grid, 1)
    vals = np.arange(grid.npix, dtype=float)
    w = Window.cap((math.pi / 2, math.pi), 0.6)
    support = support_mask(mesh, w)
    shifted = preprocess_shift(SphericalMap(grid, vals), support)
    assert shifted.values[support].min() == 0.0
    assert shifted.values.min() < 0


def test_cell_masses_examples():
    grid = PixelGrid(8)
    cm = cell_masses(SphericalMap(grid, np.ones(grid.npix)), build_mesh(grid, 3))
    assert cm.masses.size == 12 and np.allclose(cm.masses, 1 / 12)
    vals = np.zeros(grid.npix)
    vals[100] = 1
    cm = cell_masses(SphericalMap(grid, vals), build_mesh(grid, 2))
    assert cm.masses.max() == 1 and np.count_nonzero(cm.masses) == 1
    with pytest.raises(EstimationError):
        cell_masses(SphericalMap(grid, vals - 1), build_mesh(grid, 2))
    with pytest.raises(GeometryError):
        cell_masses(SphericalMap(grid, vals), build_mesh(PixelGrid(4), 1))


def test_uniform_and_dirac_exact():
    grid = PixelGrid(16)
    mesh = build_mesh(grid, 3)
    cm = cell_masses(SphericalMap(grid, np.full(grid.npix, 7.0)), mesh)
    assert np.abs(empirical_T(cm, Q).T - (Q - 1)).max() <= 1e-12
    S = empirical_spectrum(cm, Q)
    assert np.abs(S.alpha - 1).max() <= 1e-12 and np.abs(S.f - 1).max() <= 1e-12
    Sv = empirical_spectrum(cm, Q, mode="verbatim")
    assert np.allclose(Sv.alpha, math.log(2), atol=1e-12)
    vals = np.zeros(grid.npix)
    vals[7] = 3.0
    cm = cell_masses(SphericalMap(grid, vals), mesh)
    assert np.abs(empirical_T(cm, Q).T).max() == 0.0
    S = empirical_spectrum(cm, Q)
    assert np.abs(S.alpha).max() == 0.0 and np.abs(S.f).max() == 0.0


def test_steradian_area_shifts_denominator():
    grid = PixelGrid(8)
    mesh = build_mesh(grid, 1)
    cm = cell_masses(SphericalMap(grid, np.full(grid.npix, 1.0)), mesh)
    T_norm = empirical_T(cm, Q).T
    T_sr = empirical_T(cm, Q, area="steradian").T
    ratio = math.log2(float(mesh.cell_measure)) / math.log2(mesh.cell_area)
    assert np.allclose(T_sr, T_norm * ratio, atol=1e-14)
    with pytest.raises(ValueError):
        empirical_T(cm, Q, area="acres")


positive_maps = arrays(np.float64, GRID.npix, elements=st.floats(0.0, 1e3))


@settings(max_examples=80, deadline=None)
@given(positive_maps)
def test_estimator_invariants(values):
    if values.sum() <= 0:
        values = values + 1.0
    mesh = build_mesh(GRID, 1)
    cm = cell_masses(SphericalMap(GRID, values), mesh)
    if np.count_nonzero(cm.masses) < 1:
        return
    T = empirical_T(cm, Q).T
    assert empirical_T(cm, [1.0]).T[0] == 0.0
    assert np.all(np.diff(T) >= -1e-12)
    assert np.diff(T, 2).max() <= 1e-10
    S = empirical_spectrum(cm, Q)
    assert np.allclose(S.f, Q * S.alpha - T, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(positive_maps, st.sampled_from([2.0, 0.5, 8.0, 0.125]))
def test_power_of_two_rescaling_is_exact(values, c):
    values = values + 1.0
    mesh = build_mesh(GRID, 1)
    a = cell_masses(SphericalMap(GRID, values), mesh)
    b = cell_masses(SphericalMap(GRID, values * c), mesh)
    assert np.array_equal(a.masses, b.masses)
    assert np.array_equal(empirical_T(a, Q).T, empirical_T(b, Q).T)
    sa, sb = empirical_spectrum(a, Q), empirical_spectrum(b, Q)
    assert np.array_equal(sa.alpha, sb.alpha) and np.array_equal(sa.f, sb.f)


def test_general_rescaling_to_rounding():
    values = np.random.default_rng(4).gamma(2.0, size=GRID.npix)
    values -= values.min()
    mesh = build_mesh(GRID, 1)
    a = empirical_T(cell_masses(SphericalMap(GRID, values), mesh), Q).T
    b = empirical_T(cell_masses(SphericalMap(GRID, values * 3.7), mesh), Q).T
    assert np.allclose(a, b, rtol=0, atol=1e-13)


def test_zero_mass_cells_excluded_for_negative_q():
    grid = PixelGrid(4)
    vals = np.ones(grid.npix)
    vals[:16] = 0
    cm = cell_masses(SphericalMap(grid, vals), build_mesh(grid, 2))
    T = empirical_T(cm, [-2.0, -1.0, 0.5]).T
    assert np.all(np.isfinite(T))
    S = empirical_spectrum(cm, [-2.0, 2.0])
    assert np.all(np.isfinite(S.alpha))


def test_windowed_masses_and_multilevel():
    grid = PixelGrid(16)
    vals = np.random.default_rng(0).gamma(1.0, size=grid.npix)
    sky = SphericalMap(grid, vals)
    w = Window.cap_from_area((1.0, 2.0), 1.231)
    cm = cell_masses(sky, build_mesh(grid, 1), w)
    assert cm.included.sum() == cm.masses.size < build_mesh(grid, 1).cell_count
    assert cm.masses.sum() == pytest.approx(1.0)
    uniform = SphericalMap(grid, np.ones(grid.npix))
    T = empirical_T_multilevel(uniform, [0, 1, 2], Q).T
    assert np.allclose(T, Q - 1, atol=1e-12)
    with pytest.raises(EstimationError):
        empirical_T_multilevel(uniform, [1], Q)


def test_reordered_map_gives_same_estimate():
    grid = PixelGrid(8)
    sky = SphericalMap(grid, np.random.default_rng(2).random(grid.npix))
    ring = sky.reordered("ring")
    a = empirical_T(cell_masses(sky, build_mesh(grid, 2)), Q).T
    b = empirical_T(cell_masses(ring, build_mesh(ring.grid, 2)), Q).T
    assert np.allclose(a, b, atol=1e-13)
    assert np.array_equal(ring.reordered("nested").values, sky.values)
