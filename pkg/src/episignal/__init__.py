"""County clustering, first-digit auditing, and seasonal ARIMA
forecasting for daily epidemic count data."""

from .benford import (
    AuditVerdict,
    BenfordReport,
    Classification,
    DigitHistogram,
    MadBand,
    analyze_values,
    audit,
    benford_pmf,
    chi_square,
    digit_histogram,
    first_digit,
    ks_statistic,
    mad,
    mantissa_stats,
    z_scores,
)
from .cluster import (
    Assignment,
    ClusterSummary,
    ElbowCurve,
    KMeansModel,
    cluster_summary,
    elbow_scan,
    kmeans_fit,
    knee_detect,
    silhouette,
)
from .dataset import (
    CaseSeries,
    CaseSeriesMap,
    CountyKey,
    FeatureMatrix,
    LoadWarning,
    Period,
    ProfileSchema,
    load_case_series,
    load_profiles,
    merge_profiles,
    minmax_scale,
    normalize_name,
    prune_correlated,
    slice_period,
)
from .pipeline import (
    ClusterParamTable,
    HoldoutMetrics,
    RunConfig,
    RunResult,
    build_config,
    default_param_table,
    holdout_evaluate,
    parse_config_file,
    run_pipeline,
)
from .sarima import (
    FittedSarima,
    Forecast,
    SarimaParams,
    SarimaSpec,
    acf,
    css_loglik,
    difference,
    fit,
    forecast,
    grid_search,
    pacf,
    simulate,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
