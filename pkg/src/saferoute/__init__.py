"""Safest-route planning over a Bayesian network of road-safety variables."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .estimator import K2BayesianNetwork
from .inference import (
    MarginalDistribution,
    collision_probability,
    eliminate_marginal,
    enumerate_marginal,
    evidence_from_labels,
    safety_probability,
)
from .learn import (
    DirichletPrior,
    K2Config,
    SufficientStats,
    count_stats,
    k2_log_score,
    k2_search,
    learn_parameters,
    network_log_score,
)
from .network import (
    BayesianNetwork,
    Cpt,
    DagStructure,
    Dataset,
    Schema,
    VariableSpec,
    case_study_schema,
    joint_probability,
    log_likelihoods,
    validate_dag,
)
from .routing import (
    Edge,
    RoadGraph,
    Route,
    SegmentState,
    assign_safety,
    edge_weight,
    route_safety,
    route_score,
    safest_route,
)
