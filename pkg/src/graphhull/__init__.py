"""GraphHull: an archetypal latent-space model for graphs.

Nodes live inside anchor-dominant local convex hulls carved out of a global
archetype simplex. The package covers graph handling and link-prediction
splits, the constrained parameterisation, the MAP objective with hand-written
gradients, forward sampling, geometric diagnostics and evaluation metrics.
"""

__version__ = "0.1.0"

from .diagnostics import (GeometryReport, disjointness_certificate,
                          effective_log_volume, geometry_report,
                          hull_intersection_oracle, near_zero_fraction)
from .evaluation import (MetricsReport, ari, auc_pr, auc_roc, evaluate_links,
                         link_scores, nmi, pca_project, reorder_adjacency)
from .generator import GenerativeDraw, sample, sample_graph, sample_state
from .graph import (DisconnectedGraphError, Graph, GraphFormatError, SplitResult,
                    degrees, load_edge_list, read_edge_list, split_links)
from .inference import (FitConfig, FitReport, fit, gradient, lipschitz_bound,
                        spectral_init, value_and_gradient)
from .objective import (ObjectiveBreakdown, SubsampleConfig, dpp_log_prior,
                        loglik_exact, loglik_subsampled, map_objective)
from .params import Hyperparams, ModelParams, ModelState, build_state

__all__ = [
    "GeometryReport", "disjointness_certificate", "effective_log_volume",
    "geometry_report", "hull_intersection_oracle", "near_zero_fraction",
    "MetricsReport", "ari", "auc_pr", "auc_roc", "evaluate_links", "link_scores",
    "nmi", "pca_project", "reorder_adjacency",
    "GenerativeDraw", "sample", "sample_graph", "sample_state",
    "DisconnectedGraphError", "Graph", "GraphFormatError", "SplitResult",
    "degrees", "load_edge_list", "read_edge_list", "split_links",
    "FitConfig", "FitReport", "fit", "gradient", "lipschitz_bound",
    "spectral_init", "value_and_gradient",
    "ObjectiveBreakdown", "SubsampleConfig", "dpp_log_prior", "loglik_exact",
    "loglik_subsampled", "map_objective",
    "Hyperparams", "ModelParams", "ModelState", "build_state",
]
