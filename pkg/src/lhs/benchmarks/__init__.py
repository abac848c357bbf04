"""Instances, rollouts, scoring and reference heuristics for TSP, CVRP, Knapsack and OBP."""

from .evaluate import ALPHA, Benchmark, InstanceResult, Score, evaluate
from .features import feature_frames
from .instances import (
    CvrpInstance,
    Family,
    InstanceSpec,
    KnapsackInstance,
    ObpInstance,
    TspInstance,
    gen_cvrp,
    gen_knapsack,
    gen_obp,
    gen_tsp,
)
from .reference import REFERENCES
from .rollout import Policy, RolloutInvalid, RolloutTimeout, reference_heuristic, rollout, run_rollout
from .suites import build_benchmark, eval_benchmark, probe_frames, probe_instances, probe_validate, search_benchmark

__all__ = [
    "ALPHA", "Benchmark", "InstanceResult", "Score", "evaluate", "feature_frames", "CvrpInstance",
    "Family", "InstanceSpec", "KnapsackInstance", "ObpInstance", "TspInstance", "gen_cvrp",
    "gen_knapsack", "gen_obp", "gen_tsp", "REFERENCES", "Policy", "RolloutInvalid", "RolloutTimeout",
    "reference_heuristic", "rollout", "run_rollout", "build_benchmark", "eval_benchmark",
    "probe_frames", "probe_instances", "probe_validate", "search_benchmark",
]
