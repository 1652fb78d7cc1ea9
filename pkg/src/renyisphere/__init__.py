"""Rényi functions and multifractal spectra of random fields on the sphere.

Theoretical curves for six families of mother fields, cascade simulation on
HEALPix pixel centers, partition-sum estimation on dyadic meshes and
regression fitting of the families to empirical curves.
"""
from .cascade import CascadeConfig, CovarianceSpec, simulate_cascade
from .errors import (DomainError, EstimationError, FitError, FormatError, GeometryError,
                     MomentDomainError, SimulationError)
from .estimator import (CellMasses, SphericalMap, cell_masses, empirical_spectrum, empirical_T,
                        empirical_T_multilevel, preprocess_shift)
from .fitting import FitResult, fit_family, fit_linear_family, fit_nonlinear_family
from .models import (Family, ModelSpec, RenyiCurve, SpectrumCurve, ValidityReport,
                     check_conditions, evaluate_curves, moment_log, renyi_T, spectrum_point)
from .sphere import DyadicMesh, PixelGrid, SkyCoord, Window, build_mesh

__version__ = "0.1.0"

__all__ = [
    "CascadeConfig", "CellMasses", "CovarianceSpec", "DomainError", "DyadicMesh",
    "EstimationError", "Family", "FitError", "FitResult", "FormatError", "GeometryError",
    "ModelSpec", "MomentDomainError", "PixelGrid", "RenyiCurve", "SimulationError", "SkyCoord",
    "SpectrumCurve", "SphericalMap", "ValidityReport", "Window", "build_mesh", "cell_masses",
    "check_conditions", "empirical_T", "empirical_T_multilevel", "empirical_spectrum",
    "evaluate_curves", "fit_family", "fit_linear_family", "fit_nonlinear_family", "moment_log",
    "preprocess_shift", "renyi_T", "simulate_cascade", "spectrum_point",
]
