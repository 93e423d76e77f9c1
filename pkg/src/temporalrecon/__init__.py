"""Temporal hierarchical forecast reconciliation for aggregated ARMA processes."""

from .aggtheory import aggregate_ar1, aggregated_order, gamma01, optimal_G_theoretical, theoretical_W1
from .arma import ArmaModel, ArmaSpec, draw_stationary, fit, forecast, rolling_forecasts, select_order, simulate
from .evaluate import EvalReport, MCBResult, mcb_test, percentile_summary, rmae_rel, rmse_rel, run_protocol, trimmed_mean
from .hierarchy import (
    HierarchySeries,
    TemporalHierarchy,
    aggregate,
    build_hierarchy_series,
    build_summing_matrix,
    check_coherence,
    stack_period,
)
from .reconcile import BOTTOM_UP, CovSpec, WMatrix, bottom_up_G, estimate_W, mint_G, ols_G, parse_method, reconcile

__version__ = "0.1.0"
