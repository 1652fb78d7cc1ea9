"""Partition-sum estimation of the Rényi function from maps.

A uniform map gives T(q) = q - 1 exactly; a map concentrated on one pixel
gives the Dirac curve. A random positive map sits in between, and a
spherical cap window restricts the analysis to part of the sky.
"""
import numpy as np

from renyisphere import (PixelGrid, SphericalMap, Window, build_mesh, cell_masses, empirical_spectrum,
                         empirical_T)

grid = PixelGrid(16)
mesh = build_mesh(grid, 2)
q = np.round(np.arange(0.5, 3.01, 0.5), 12)

uniform = SphericalMap(grid, np.ones(grid.npix))
dirac = SphericalMap(grid, np.eye(1, grid.npix, 5).ravel())
rng = np.random.default_rng(0)
noisy = SphericalMap(grid, rng.lognormal(0.0, 1.0, grid.npix))

for name, sky in (("uniform", uniform), ("dirac", dirac), ("lognormal noise", noisy)):
    T = empirical_T(cell_masses(sky, mesh), q)
    print(f"{name:16s}", " ".join(f"{t:+.4f}" for t in T.T))

cap = Window.cap_from_area((1.0, 2.0), 1.0)
masses = cell_masses(noisy, mesh, cap)
S = empirical_spectrum(masses, q)
print(f"cap window keeps {masses.masses.size} of {mesh.cell_count} cells;",
      "alpha:", " ".join(f"{a:.3f}" for a in S.alpha))
