"""Möbius-invariant optimal-transport distances between disk-type surfaces."""

from .consistency import ScoredCorrespondence, filter_top, mobius_to_sl2, score_pairs, variance_scores
from .density import ConformalDensity, eval_density, fit_density, tps_kernel
from .errors import MobiusOTError, NumericalError, ValidationError
from .hyperbolic import (DiskMobius, QuadratureGrid, base_mobius, build_quadrature, hyperbolic_distance,
                         mobius_compose, mobius_family, mobius_inverse)
from .local_distance import CostMatrix, LocalDistanceConfig, cost_matrix, local_distance
from .mesh import TriMesh, build_midedge, load_mesh, normalize_area, save_mesh, validate
from .pipeline import PipelineConfig, compare, matrix, mds_embed
from .sampling import DiscreteMeasure, fps_sample, sample_surface, voronoi_masses
from .synth import synth_surface
from .transport import (TransportPlan, TransportProblem, extract_correspondence, solve_full, solve_partial,
                        transport_cost)
from .uniformize import uniformize

__all__ = [
    "ScoredCorrespondence",
    "filter_top",
    "mobius_to_sl2",
    "score_pairs",
    "variance_scores",
    "ConformalDensity",
    "eval_density",
    "fit_density",
    "tps_kernel",
    "MobiusOTError",
    "NumericalError",
    "ValidationError",
    "DiskMobius",
    "QuadratureGrid",
    "base_mobius",
    "build_quadrature",
    "hyperbolic_distance",
    "mobius_compose",
    "mobius_family",
    "mobius_inverse",
    "CostMatrix",
    "LocalDistanceConfig",
    "cost_matrix",
    "local_distance",
    "TriMesh",
    "build_midedge",
    "load_mesh",
    "normalize_area",
    "save_mesh",
    "validate",
    "PipelineConfig",
    "compare",
    "matrix",
    "mds_embed",
    "DiscreteMeasure",
    "fps_sample",
    "sample_surface",
    "voronoi_masses",
    "synth_surface",
    "TransportPlan",
    "TransportProblem",
    "extract_correspondence",
    "solve_full",
    "solve_partial",
    "transport_cost",
    "uniformize",
]

__version__ = "0.1.0"
