"""Spatially adaptive variable screening with missed-discovery-rate control."""

from .baselines import bh_fdr, fdr_smoothing_select, mdr_independent, z_to_pvalues
from .densities import (DensityModel, estimate_alt_density, estimate_empirical_null,
                        estimate_null_proportion, null_density, theoretical_null)
from .estimator import SpatialMDR
from .fused import (PriorField, default_lambda_grid, fit_prior, fused_lasso_1d,
                    fusion_lambda_bound, objective, select_lambda)
from .grid import GridGraph, build_grid
from .posterior import PosteriorField, compute_posterior, estimate_signal_count
from .screening import Selection, bmdr, bmdr_trace, oracle_screen, screen_smdr
from .simulation import (MetricsRecord, PipelineConfig, SimScenario, ZGrid, evaluate,
                         make_signal_region, paper_scenario, run_benchmark, simulate)

__all__ = [
    "DensityModel", "GridGraph", "MetricsRecord", "PipelineConfig", "PosteriorField",
    "PriorField", "Selection", "SimScenario", "SpatialMDR", "ZGrid",
    "bh_fdr", "bmdr", "bmdr_trace", "build_grid", "compute_posterior",
    "default_lambda_grid", "estimate_alt_density", "estimate_empirical_null",
    "estimate_null_proportion", "estimate_signal_count", "evaluate",
    "fdr_smoothing_select", "fit_prior", "fused_lasso_1d", "fusion_lambda_bound",
    "make_signal_region", "mdr_independent", "null_density", "objective",
    "oracle_screen", "paper_scenario", "run_benchmark", "screen_smdr",
    "select_lambda", "simulate", "theoretical_null", "z_to_pvalues",
]

__version__ = "0.1.0"
