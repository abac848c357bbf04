import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lhs.benchmarks import (
    Benchmark,
    CvrpInstance,
    KnapsackInstance,
    ObpInstance,
    Policy,
    RolloutInvalid,
    RolloutTimeout,
    TspInstance,
    evaluate,
    feature_frames,
    gen_cvrp,
    gen_knapsack,
    gen_obp,
    gen_tsp,
    reference_heuristic,
    rollout,
    run_rollout,
)
from lhs.benchmarks.features import CvrpState, ObpState, TspState
from lhs.benchmarks.io import load_instances, save_instances, score_rows, write_results_csv
from lhs.benchmarks.oracles import knapsack_optimum, tsp_optimum
from lhs.benchmarks.reference import REFERENCES, priority_obp_lhs, select_cvrp_lhs
from lhs.diffmath import ContractError
from lhs.dsl import ParseError, Task, from_tree, parse
from lhs.dsl.sampling import random_tree

SQUARE = TspInstance(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))


def prog(text, task):
    return Policy.from_program(parse(text, task))


def rng(seed=0):
    return np.random.default_rng(seed)


# -- generators --------------------------------------------------------------

def test_gen_tsp_determinism():
    a, b = gen_tsp(50, rng(7)), gen_tsp(50, rng(7))
    assert np.array_equal(a.coords, b.coords)
    assert ((a.coords >= 0) & (a.coords < 1)).all()


def test_tsp_distance_matrix_properties():
    D = gen_tsp(20, rng(1)).dist
    assert np.allclose(D, D.T) and np.all(np.diag(D) == 0)
    for i in range(20):
        for j in range(20):
            assert (D[i, j] <= D[i, :] + D[:, j] + 1e-12).all()


def test_gen_knapsack_strong_values():
    inst = gen_knapsack("STRONG", 3, 100, rng(0))
    assert np.array_equal(inst.values, inst.weights + 10)
    fixed = KnapsackInstance(np.array([20, 30, 40]), np.array([20, 30, 40]) + 10)
    assert fixed.values.tolist() == [30, 40, 50]


@pytest.mark.parametrize("family", ["UNCORRELATED", "WEAK", "STRONG"])
def test_gen_knapsack_ranges(family):
    inst = gen_knapsack(family, 2000, 100, rng(3))
    w, v = inst.weights, inst.values
    assert w.min() >= 1 and w.max() <= 100 and v.min() >= 1
    if family == "WEAK":
        assert (v >= np.maximum(1, w - 10)).all() and (v <= w + 10).all()
    if family == "UNCORRELATED":
        assert v.max() <= 100
    assert [t[2] for t in inst.items] == list(range(2000))


def test_gen_obp_mean_size():
    inst = gen_obp(5000, rng(11))
    assert 38 <= inst.sizes.mean() <= 43
    assert inst.sizes.min() >= 1 and inst.sizes.max() <= 100


def test_gen_cvrp_demands():
    inst = gen_cvrp(500, 40, rng(2))
    assert inst.demands.min() >= 1 and inst.demands.max() <= 9
    assert len(inst.demands) == inst.n == 500


# -- rollouts ----------------------------------------------------------------

def test_tsp_square_tour():
    assert rollout(prog("NEG F0", "TSP"), SQUARE) == pytest.approx(4.0)
    assert rollout(reference_heuristic("funsearch_tsp_nn"), SQUARE) == pytest.approx(4.0)


def test_cvrp_two_trips():
    inst = CvrpInstance(np.zeros(2), np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([30, 30]), 40)
    for policy in (prog("NEG F0", "CVRP"), reference_heuristic("lhs_cvrp")):
        res = run_rollout(policy, inst)
        assert res.cost == pytest.approx(4.0)
        assert sorted(map(tuple, res.solution)) == [(1,), (2,)]


def test_knapsack_ratio_greedy_example():
    inst = KnapsackInstance(np.array([5, 4, 6]), np.array([10, 7, 12]), 10)
    assert rollout(reference_heuristic("ratio_greedy_knapsack"), inst) == 17
    assert rollout(prog("F2", "KNAPSACK"), inst) == 17
    assert knapsack_optimum(inst.weights, inst.values, 10) == 19


def test_lhs_obp_priorities():
    pr = priority_obp_lhs(20, np.array([30, 50, 20]))
    assert pr.tolist() == [-30, -50, -20]
    assert int(np.argmax(pr)) == 2


def test_lhs_cvrp_empty_feasible_returns_depot():
    D = np.zeros((3, 3))
    assert select_cvrp_lhs(1, 0, np.array([2]), 3, np.array([0, 0, 9]), D) == 0


def test_feature_frames_documented_columns():
    inst = gen_tsp(6, rng(5))
    s = TspState(2, 0, np.array([1, 3, 4, 5]), inst.dist, 6)
    f = feature_frames(Task.TSP, s)
    assert np.array_equal(f.matrix[:, 0], inst.dist[2, [1, 3, 4, 5]])
    assert np.array_equal(f.matrix[:, 1], inst.dist[0, [1, 3, 4, 5]])
    assert np.allclose(f.matrix[:, 4], 4 / 6)

    o = feature_frames(Task.OBP, ObpState(25, np.array([30, 10, 60]), 100))
    assert np.array_equal(o.matrix[:, 1], o.matrix[:, 0] - 25)
    assert ((o.matrix[:, 1] < 0) == ~o.feasible).all()

    cv = gen_cvrp(4, 40, rng(0))
    st_ = CvrpState(1, np.array([2, 3, 4]), 5, 40, np.array([0, 3, 9, 5, 2]), cv.dist)
    f = feature_frames(Task.CVRP, st_)
    # row 0 is the depot, then customers 2, 3, 4 with demands 9, 5, 2
    assert f.feasible.tolist() == [True, False, True, True]


def conserved_cvrp(inst, res):
    served = [c for r in res.solution for c in r]
    assert sorted(served) == list(range(1, inst.n + 1))
    for r in res.solution:
        assert inst.demands[np.array(r) - 1].sum() <= inst.capacity


def conserved_obp(inst, res):
    loads = np.bincount(res.solution, weights=inst.sizes, minlength=int(res.cost))
    assert len(loads) == res.cost
    assert math.isclose(loads.sum(), inst.sizes.sum())
    assert loads.max() <= inst.capacity


def random_policy(task, seed):
    r = np.random.default_rng(seed)
    while True:
        try:
            return Policy.from_program(from_tree(random_tree(task, r, 4), task))
        except ParseError:
            pass


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_cvrp_conservation(iseed, pseed):
    inst = gen_cvrp(15, 40, rng(iseed))
    try:
        res = run_rollout(random_policy(Task.CVRP, pseed), inst)
    except RolloutInvalid:
        return
    conserved_cvrp(inst, res)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_obp_conservation(iseed, pseed):
    inst = gen_obp(200, rng(iseed))
    try:
        res = run_rollout(random_policy(Task.OBP, pseed), inst)
    except RolloutInvalid:
        return
    conserved_obp(inst, res)


def test_reference_conservation():
    inst = gen_cvrp(50, 40, rng(9))
    conserved_cvrp(inst, run_rollout(reference_heuristic("lhs_cvrp"), inst))
    inst = gen_obp(500, rng(9))
    for name in ("lhs_obp", "best_fit_obp", "first_fit_obp"):
        conserved_obp(inst, run_rollout(reference_heuristic(name), inst))


def test_oracle_bounds_small():
    for s in range(10):
        inst = gen_knapsack("WEAK", 10, 100, rng(s))
        opt = knapsack_optimum(inst.weights, inst.values, 100)
        for name in ("lhs_knapsack", "ratio_greedy_knapsack"):
            assert rollout(reference_heuristic(name), inst) <= opt
        t = gen_tsp(7, rng(s))
        assert rollout(reference_heuristic("lhs_tsp"), t) >= tsp_optimum(t.coords) - 1e-12


def test_policy_chooses_illegal_action():
    bad = Policy(Task.TSP, custom=lambda s: 0)
    with pytest.raises(RolloutInvalid, match="illegal"):
        rollout(bad, SQUARE)


def test_cvrp_step_budget():
    # a policy that keeps returning to the depot would loop forever
    inst = gen_cvrp(5, 40, rng(0))
    stuck = Policy(Task.CVRP, custom=lambda s: 0)
    with pytest.raises(RolloutInvalid, match="budget"):
        rollout(stuck, inst)


def test_task_mismatch_rejected():
    with pytest.raises(ValueError):
        rollout(prog("NEG F0", "CVRP"), SQUARE)
    with pytest.raises(KeyError):
        reference_heuristic("nope")


# -- evaluate ----------------------------------------------------------------

def test_score_arithmetic():
    a = TspInstance(SQUARE.coords)
    b = TspInstance(SQUARE.coords * 1.5)
    score = evaluate(prog("NEG F0", "TSP"), Benchmark(Task.TSP, [a, b]))
    assert score.costs == pytest.approx([4.0, 6.0])
    assert score.y == pytest.approx(5.0) and score.s == -score.y and score.valid


def test_evaluate_empty_benchmark():
    with pytest.raises(ContractError):
        evaluate(prog("NEG F0", "TSP"), Benchmark(Task.TSP, []))


def test_evaluate_parallelism_invariant():
    insts = [gen_tsp(30, rng(i)) for i in range(8)]
    p = reference_heuristic("lhs_tsp")
    one = evaluate(p, Benchmark(Task.TSP, insts), 1)
    eight = evaluate(p, Benchmark(Task.TSP, insts), 8)
    rev = evaluate(p, Benchmark(Task.TSP, insts[::-1]), 1)
    assert one.y == eight.y and one.costs == eight.costs
    assert one.y == rev.y


def test_evaluate_invalid_program_does_not_raise():
    inst = TspInstance(np.array([[0.0, 0.0], [800.0, 0.0], [0.0, 900.0]]))
    score = evaluate(prog("EXP F0", "TSP"), Benchmark(Task.TSP, [inst]))
    assert not score.valid and score.s is None and score.y is None


def test_timeout_path():
    def slow(state):
        time.sleep(0.02)
        return int(state.unvisited[0])

    inst = gen_tsp(20, rng(0))
    with pytest.raises(RolloutTimeout):
        rollout(Policy(Task.TSP, custom=slow), inst, timeout=0.05)
    score = evaluate(Policy(Task.TSP, custom=slow), Benchmark(Task.TSP, [inst], timeout=0.05))
    assert not score.valid and "timeout" in score.error


def test_every_reference_runs():
    insts = {Task.TSP: gen_tsp(12, rng(0)), Task.CVRP: gen_cvrp(12, 40, rng(0)),
             Task.KNAPSACK: gen_knapsack("WEAK", 12, 100, rng(0)), Task.OBP: gen_obp(60, rng(0))}
    for name, (task, _) in REFERENCES.items():
        assert math.isfinite(rollout(reference_heuristic(name), insts[task]))


# -- io -------------------------------------------------------------------------

def test_instance_json_round_trip(tmp_path):
    insts = [gen_tsp(5, rng(0), seed=1), gen_cvrp(4, 40, rng(0), seed=2),
             gen_knapsack("WEAK", 6, 100, rng(0), seed=3), gen_obp(9, rng(0), seed=4)]
    save_instances(tmp_path / "i.json", insts)
    back = load_instances(tmp_path / "i.json")
    for a, b in zip(insts, back):
        assert a.task is b.task and a.seed == b.seed
    assert np.array_equal(back[0].coords, insts[0].coords)
    assert np.array_equal(back[2].values, insts[2].values)
    assert np.array_equal(back[3].sizes, insts[3].sizes)


def test_results_csv(tmp_path):
    score = evaluate(prog("NEG F0", "TSP"), Benchmark(Task.TSP, [SQUARE]))
    write_results_csv(tmp_path / "r.csv", score_rows("abc", Task.TSP, score))
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "policy_id,task,instance_id,cost,wall_ms,valid"
    assert lines[1].startswith("abc,TSP,0,4.0,")
