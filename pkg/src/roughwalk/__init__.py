"""Markov chains on periodic graphs, their rough-path lifts, and the area
anomaly of the diffusive limit."""

from .algebra import (EmbeddedPath, RoughPoint, area_linear_transform, area_sequence,
                      chen_product, dilate, discrete_area, donsker_embed, homogeneous_norm)
from .anomaly import (AnomalyReport, EnumerationResult, corr_term, estimate_constants,
                      exact_gamma_enumeration, gamma_closed_form_rotating)
from .graph import (GraphPoint, PeriodicGraphModel, Transition, ValidationReport,
                    builtin_model, check_irreducible, cubic_model, embed, load_model_file,
                    project_transition_law, rotating_model, save_model_file, validate,
                    whitening_transform)
from .sampler import (Excursion, Trajectory, decompose_excursions, excursion_stream,
                      sample_trajectory)
from .sde import (SU2State, VectorField1D, corrected_euler, drive_difference_eq,
                  su2_cayley_step)
from .stats import CumulantSummary, Histogram, MomentAccumulator

__version__ = "0.1.0"

__all__ = [
    "AnomalyReport", "CumulantSummary", "EmbeddedPath", "EnumerationResult", "Excursion",
    "GraphPoint", "Histogram", "MomentAccumulator", "PeriodicGraphModel", "RoughPoint",
    "SU2State", "Trajectory", "Transition", "ValidationReport", "VectorField1D",
    "area_linear_transform", "area_sequence", "builtin_model", "chen_product",
    "check_irreducible", "corr_term", "corrected_euler", "cubic_model",
    "decompose_excursions", "dilate", "discrete_area", "donsker_embed",
    "drive_difference_eq", "embed", "estimate_constants", "excursion_stream",
    "exact_gamma_enumeration", "gamma_closed_form_rotating", "homogeneous_norm",
    "load_model_file", "project_transition_law", "rotating_model", "sample_trajectory",
    "save_model_file", "su2_cayley_step", "validate", "whitening_transform",
]
