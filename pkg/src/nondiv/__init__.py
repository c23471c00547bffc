"""nondiv: a numerical laboratory for non-divergence harmonic map flows.

Discretizes the trace-form (affine and Hermitian) harmonic map operators on
compact periodic domains, evolves the associated parabolic systems, and
classifies each run as converged, circling, blown up, chart-exited, or
budget-exhausted.
"""

__version__ = "0.1.0"

from .fields import MapField, linear_map, onto_geodesic_map, perturbed_linear_map, point_map
from .flow import FlowConfig, FlowState, RunVerdict, run, stable_dt, step
from .geometry import (ChartChange, DomainStructure, build_affine_torus, build_domain,
                       build_hermitian_torus, build_hopf_torus, transform_operator)
from .grid import PeriodicGrid
from .operators import (DiscreteOperator, divergence_tension, drift_prediction,
                        invariant_measure, scalar_operator_matrix, tension)
from .targets import TargetManifold, catalog_lookup, geodesic_distance, parallel_transport

__all__ = [
    "MapField", "linear_map", "onto_geodesic_map", "perturbed_linear_map", "point_map",
    "FlowConfig", "FlowState", "RunVerdict", "run", "stable_dt", "step",
    "ChartChange", "DomainStructure", "build_affine_torus", "build_domain",
    "build_hermitian_torus", "build_hopf_torus", "transform_operator",
    "PeriodicGrid", "DiscreteOperator", "divergence_tension", "drift_prediction",
    "invariant_measure", "scalar_operator_matrix", "tension",
    "TargetManifold", "catalog_lookup", "geodesic_distance", "parallel_transport",
]
