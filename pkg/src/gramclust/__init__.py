"""Clustering of N objects with P >> N features via transforms of the
normalized left Gram matrix, with BIC selection of the cluster count."""

from .data import (
    FeatureMatrix,
    GramMatrix,
    gram,
    preprocess_dataset,
    read_feature_csv,
    standardize_columns,
)
from .hierarchy import ClusterAssignment, Dendrogram, cut_tree, ward_dendrogram
from .metrics import ContingencyTable, ami, contingency, expected_mutual_info
from .mixture import FitResult, MixtureParams, cem_fit, component_density_log, estep, mstep
from .select import ClusterOutput, bic, cluster_features, num_params
from .synth import (
    BoundInputs,
    MixtureSpec,
    SimulationPlan,
    deviation_bound,
    empirical_concentration,
    expectation_check,
    gen_mixture,
)
from .transform import (
    AugmentedGram,
    RowExpectations,
    augment,
    augment_with_clusters,
    expected_rows,
    separability_diagnostic,
)

__version__ = "0.1.0"

__all__ = [
    "FeatureMatrix",
    "GramMatrix",
    "gram",
    "preprocess_dataset",
    "read_feature_csv",
    "standardize_columns",
    "ClusterAssignment",
    "Dendrogram",
    "cut_tree",
    "ward_dendrogram",
    "ContingencyTable",
    "ami",
    "contingency",
    "expected_mutual_info",
    "FitResult",
    "MixtureParams",
    "cem_fit",
    "component_density_log",
    "estep",
    "mstep",
    "ClusterOutput",
    "bic",
    "cluster_features",
    "num_params",
    "BoundInputs",
    "MixtureSpec",
    "SimulationPlan",
    "deviation_bound",
    "empirical_concentration",
    "expectation_check",
    "gen_mixture",
    "AugmentedGram",
    "RowExpectations",
    "augment",
    "augment_with_clusters",
    "expected_rows",
    "separability_diagnostic",
    "__version__",
]
