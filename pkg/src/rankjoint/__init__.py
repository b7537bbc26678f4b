"""Ranked-choice conjoint analysis: rank expansion, AMCE estimation with CR2
variance, efficiency diagnostics, consistency tests, and simulation."""

from .consistency import (
    RetestKind,
    RetestRecord,
    ViolationSummary,
    iia_violation,
    refit_excluding_violators,
    summarize_counts,
    summarize_violations,
    transitivity_violation,
    two_proportion_test,
)
from .data import (
    Attribute,
    AttributeSchema,
    ConjointDataset,
    Mode,
    group_tasks,
    load_dataset_csv,
    load_schema,
    validate_dataset,
    write_dataset_csv,
)
from .efficiency import (
    EfficiencyReport,
    attribute_importance,
    efficiency_table,
    empirical_se_comparison,
    fcc_sample_multiplier,
    position_effect_check,
    precision_per_time,
    relative_precision_per_time,
    theoretical_se_reduction,
    theoretical_variance_ratio,
)
from .estimator import (
    AmceEstimator,
    AmceFit,
    ClusteredOLS,
    DesignEncoder,
    DesignMatrix,
    encode_design,
    estimate_amce,
    fit_ols,
    vcov_clustered,
    z_test_coefficients,
)
from .exceptions import DataError, RankDeficiencyError, RankjointError, SchemaError
from .expansion import (
    PairDataset,
    RankExpander,
    expand_dataset,
    normalized_rank,
    normalized_rank_dataset,
)
from .simulation import (
    SimDesign,
    corruption_sensitivity,
    null_efficiency_check,
    power_comparison,
    sampling_distribution,
    simulate_dataset,
    true_amce,
)

__version__ = "0.1.0"
