"""Interaction policies that maximise expected follows from a target set."""
from .graph import (
    CountDistribution,
    CyclicGraphError,
    GraphError,
    GraphParseError,
    GraphValidationError,
    InducedDag,
    LoadReport,
    Policy,
    SocialGraph,
    VertexMeta,
    enumerate_paths,
    find_cycle,
    induced_dag,
    is_acyclic,
    linear_extension,
    load_graph,
    overlap,
    save_graph,
    synth_graph,
)
from .ip import (
    MilpModel,
    OptimizationResult,
    Solution,
    SolverLimitError,
    brute_force_oracle,
    build_formulation,
    export_lp,
    optimize_policy,
    solve,
)
from .model import (
    DEFAULT_COEFFICIENTS,
    FollowProbabilities,
    LogisticCoefficients,
    ProductModel,
    coefficient_triangle,
    dag_follow_probs_general,
    dag_follow_probs_linear,
    delta_table,
    elementary_symmetric,
    expected_follows,
    logistic_follow_prob,
    path_sum_probs,
    susceptibility,
)
from .policies import (
    CentralityScores,
    ConvergenceError,
    centrality_policy,
    eigenvector_centrality,
    load_policy,
    policy_from_dag,
    random_append,
    save_policy,
)
from .reference import listed_baselines, targets_table
from .simulate import (
    GuardError,
    SimulationReport,
    compare_policies,
    exact_policy_value,
    simulate_policy,
    write_reports_csv,
)

__version__ = "0.1.0"

__all__ = [
    "brute_force_oracle",
    "build_formulation",
    "centrality_policy",
    "CentralityScores",
    "coefficient_triangle",
    "compare_policies",
    "ConvergenceError",
    "CountDistribution",
    "CyclicGraphError",
    "dag_follow_probs_general",
    "dag_follow_probs_linear",
    "DEFAULT_COEFFICIENTS",
    "delta_table",
    "eigenvector_centrality",
    "elementary_symmetric",
    "enumerate_paths",
    "exact_policy_value",
    "expected_follows",
    "export_lp",
    "find_cycle",
    "FollowProbabilities",
    "GraphError",
    "GraphParseError",
    "GraphValidationError",
    "GuardError",
    "induced_dag",
    "InducedDag",
    "is_acyclic",
    "linear_extension",
    "listed_baselines",
    "load_graph",
    "load_policy",
    "LoadReport",
    "logistic_follow_prob",
    "LogisticCoefficients",
    "MilpModel",
    "OptimizationResult",
    "optimize_policy",
    "overlap",
    "path_sum_probs",
    "Policy",
    "policy_from_dag",
    "ProductModel",
    "random_append",
    "save_graph",
    "save_policy",
    "simulate_policy",
    "SimulationReport",
    "SocialGraph",
    "Solution",
    "solve",
    "SolverLimitError",
    "susceptibility",
    "synth_graph",
    "targets_table",
    "VertexMeta",
    "write_reports_csv",
]
