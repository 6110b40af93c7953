"""Forecast combination and selection inside the simplex."""
from .coda import (
    center,
    center_and_scale,
    closure,
    clr,
    clr_inv,
    perturb,
    perturb_inverse,
    power,
    total_variation,
    variation_matrix,
)
from .combine import average_forecast, combine_row, s_stc_weights
from .evaluation import (
    CasOptions,
    RollingScheme,
    accuracy_metrics,
    beat_table,
    classify_case,
    coefficient_of_variation,
    msfe_decomposition,
    rolling_evaluate,
)
from .panel import FillPolicy, ForecastPanel, apply_fill_policy, load_survey, split_panels
from .selection import (
    biplot,
    cas_select,
    cluster_cas,
    cluster_forecasts,
    pairwise_distance,
    redundancy_groups,
)
from .weights import accuracy, accuracy_matrix, euclidean_stc_weights, weight_matrix

__version__ = "0.1.0"
