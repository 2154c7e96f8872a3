"""Closed geodesics on ellipsoids from hyperelliptic period conditions."""
from .closure import (
    POWERS_FULL,
    POWERS_PROOF,
    ClosureReport,
    WindingNumbers,
    cartesian_winding,
    closure_residual_corollary,
    closure_residual_thm1,
    closure_residual_thm2,
    lattice_defect,
    predicted_length,
    solve_caustics_for_winding,
    thm2_winding_from_thm1,
)
from .config import DEFAULT, Tolerances
from .confocal import (
    CausticSet,
    Ellipsoid,
    caustic_parameters,
    cartesian_from_elliptic,
    elliptic_coordinates,
    tangency_discriminant,
)
from .errors import GeocloseError, NoSolution, NumericalError, ValidationError
from .oracle import GeodesicState, closure_test, state_from_caustics, trace
from .quadrature import abel_prime_vectors, band_integral, band_vector, gap_integral, gap_vector
from .spectral import BandIntervals, SpectralCurve, admissible_intervals, eval_P

__version__ = "0.1.0"

__all__ = [
    "BandIntervals",
    "CausticSet",
    "ClosureReport",
    "DEFAULT",
    "Ellipsoid",
    "GeocloseError",
    "GeodesicState",
    "NoSolution",
    "NumericalError",
    "POWERS_FULL",
    "POWERS_PROOF",
    "SpectralCurve",
    "Tolerances",
    "ValidationError",
    "WindingNumbers",
    "abel_prime_vectors",
    "admissible_intervals",
    "band_integral",
    "band_vector",
    "cartesian_from_elliptic",
    "cartesian_winding",
    "caustic_parameters",
    "closure_residual_corollary",
    "closure_residual_thm1",
    "closure_residual_thm2",
    "closure_test",
    "elliptic_coordinates",
    "eval_P",
    "gap_integral",
    "gap_vector",
    "lattice_defect",
    "predicted_length",
    "solve_caustics_for_winding",
    "state_from_caustics",
    "tangency_discriminant",
    "thm2_winding_from_thm1",
    "trace",
]
