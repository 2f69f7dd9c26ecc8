"""Participatory budget feedback toolkit.

Collects balanced-budget and survey ballots, aggregates them into one
balance-respecting consensus budget, clusters opinions, diagnoses
arrival-order anomalies, and reweights results to census marginals.
"""

from .aggregate import (
    AggregateBudget,
    AreaChange,
    Distribution,
    PBTally,
    Scenario,
    ScenarioSet,
    coordinate_median,
    knapsack_aggregate,
    pb_knapsack_tally,
    rebalance,
    scenarios_from_centroids,
    tally_distribution,
)
from .ballots import (
    UNANSWERED,
    BudgetSpec,
    DemographicAxis,
    EncodingSchema,
    ExpenditureBallot,
    LikertBallot,
    Question,
    ResponseRecord,
    RevenueBallot,
    Segmentation,
    ServiceArea,
    ValidationReport,
    Violation,
    assign_segment,
    build_schema,
    encode_ordinal,
    validate_expenditure,
    validate_survey,
)
from .cluster import (
    BootstrapReport,
    ClusterModel,
    FeatureMatrix,
    GapCurve,
    assign_label,
    bootstrap_stability,
    gap_statistic,
    kmeans_fit,
    load_model,
    normalize_features,
    save_model,
)
from .datastore import (
    LoadResult,
    PBElectionLog,
    PBProject,
    PBVote,
    ResponseLog,
    anonymize,
    clean_pb_election,
    feature_matrix_from_log,
    load_pb_election,
    load_responses,
    load_spec,
    save_pb_election,
    save_responses,
    spec_from_wire,
    spec_to_wire,
)
from .errors import DataError, InfeasibleError
from .progression import (
    BandSpec,
    Excursion,
    ExcursionReport,
    ProgressionSeries,
    bands_for,
    cumulative_cluster_fraction,
    daily_cluster_proportions,
    hypergeometric_bands,
    scan_excursions,
)
from .simulator import (
    ClusterProfile,
    PopulationProfile,
    Shock,
    SimulationResult,
    TurnoutSchedule,
    null_schedule,
    simulate,
)
from .stats import (
    CrossTab,
    GofResult,
    SpearmanResult,
    WeightScheme,
    chi_square_gof,
    crosstab,
    demographic_distribution,
    expand_crosstab,
    poststratification_weights,
    spearman_rho,
    weighted_tally,
)

__version__ = "0.1.0"
