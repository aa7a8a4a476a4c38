"""Model-agnostic counterfactual explanations over mixed feature spaces.

Three search methods behind one interface: a multi-objective evolutionary
search, nearest-valid-observation retrieval, and iterative nearest-instance
feature substitution, plus evaluation measures, visualization data export,
and a benchmark harness comparing the methods.
"""

__version__ = "0.1.0"

from .schema import (
    Dataset,
    DesiredTarget,
    FeatureDescriptor,
    FeatureSchema,
    Instance,
    Violation,
    load_dataset,
    load_schema,
    save_dataset,
    validate_instance,
)
from .distances import (
    gower_matrix,
    gower_matrix_fast,
    l0_matrix,
    get_distance,
    list_distances,
    register_distance,
)
from .objectives import (
    ObjectiveVector,
    PlausibilityConfig,
    evaluate_objectives,
    gower_distance,
    o_plaus,
    o_sparse,
    o_valid,
)
from .pareto import (
    constrained_dominates,
    crowding_distance,
    dominates,
    hypervolume,
    nondominated_sort,
)
from .predict import (
    PredictionCache,
    PredictionFunction,
    fit_knn,
    fit_logistic,
    threshold_model,
)
from .external import ExternalPredictor, spawn_external_predictor
from .moc import (
    GenerationLog,
    MocConfig,
    find_counterfactuals_moc,
    ice_importance,
    initialize_population,
    moc_search_trace,
    moc_statistics,
    mutate,
    recombine,
)
from .whatif import WhatIfConfig, find_counterfactuals_whatif
from .nice import (
    NiceConfig,
    find_counterfactuals_nice,
    find_x_nn,
    nice_multi_reward_union,
    reward,
)
from .results import (
    CounterfactualSet,
    parallel_plot_data,
    surface_plot_data,
    write_evaluation_csv,
)
from .benchmark import (
    BenchmarkSpec,
    benchmark_hv,
    filter_for_comparison,
    flip_target,
    rank_normalize,
    run_benchmark,
    runtime_scaling,
)
from .errors import (
    ConfigError,
    DataError,
    EmptyResultError,
    PredictorError,
    ProtocolError,
    RecourseError,
    SchemaError,
    SearchError,
)
