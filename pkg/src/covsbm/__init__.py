"""Localized spectral estimation for stochastic block models with covariates."""
from __future__ import annotations

from .bounds import BoundInputs, BoundReport, bound_report, optimal_k
from .clustering import ClusteringConfig, cluster_neighborhoods, kmeans_rows, top_svd
from .estimators import (EstimationResult, align_by_assortativity, align_by_pi_ordering, align_to_truth,
                         estimate_B, estimate_pi, oracle_estimators)
from .laplacian import (build_localized, dilation_norm, hermitian_dilation, laplacian, min_degree,
                        population_laplacians)
from .model import Box, ModelSpec, Network, builtin_fields, generate_network, make_model
from .montecarlo import ExperimentPlan, coverage, fit_loglog_slope, rate_slope, run_replication, verify
from .neighbors import knn_radius, radius_envelopes, subgroup_radius
from .pipeline import fit_pair

__version__ = "0.1.0"
