import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lhs.benchmarks import probe_frames
from lhs.dsl import (
    CorpusEntry,
    FeatureFrame,
    InvalidProgram,
    ParseError,
    Strategy,
    Task,
    TOKENS,
    augment,
    choose,
    dedupe,
    finite_on,
    from_tree,
    interpret,
    parse,
    read_corpus,
    sample_seed_program,
    select,
    serialize,
    write_corpus,
)
from lhs.dsl.sampling import random_tree
from lhs.dsl.vocab import CONSTANT_GRID, FEATURE_COUNT, VOCAB_SIZE


def frame(task, *cols, feasible=None):
    m = np.column_stack([np.asarray(c, dtype=float) for c in cols])
    pad = FEATURE_COUNT[task] - m.shape[1]
    if pad > 0:
        m = np.hstack([m, np.zeros((m.shape[0], pad))])
    feas = np.ones(m.shape[0], dtype=bool) if feasible is None else np.asarray(feasible)
    return FeatureFrame(task, m, feas)


def random_program(task, seed, depth=5):
    rng = np.random.default_rng(seed)
    while True:
        try:
            return from_tree(random_tree(task, rng, depth), task)
        except ParseError:
            continue


# -- vocabulary and parsing ------------------------------------------------------

def test_vocab_dense_and_stable():
    assert len(TOKENS) == VOCAB_SIZE == len(set(TOKENS))
    assert TOKENS[:3] == ("PAD", "BOS", "EOS")
    assert [float(c) for c in CONSTANT_GRID] == [-2.0, -1.0, -0.5, -0.2, 0.0, 0.2, 0.5, 1.0, 2.0]


def test_parse_neg_f0():
    p = parse(["NEG", "F0"], Task.TSP)
    assert p.depth == 2 and len(p) == 2


@pytest.mark.parametrize("tokens, match", [
    (["ADD", "F0"], "underflow"),
    (["F0", "F1"], "trailing"),
    (["FOO"], "unknown"),
    ([], "empty"),
    (["BOS", "F0"], "control"),
    (["F7"], "not defined"),
])
def test_parse_errors(tokens, match):
    with pytest.raises(ParseError, match=match):
        parse(tokens, "TSP")


def test_parse_length_limit():
    tokens = ["NEG"] * 64 + ["F0"]
    with pytest.raises(ParseError, match="limit"):
        parse(tokens, "TSP")
    assert len(parse(["NEG"] * 63 + ["F0"], "TSP")) == 64


def test_div_by_zero_constant_parses():
    assert parse("DIV F1 C0.0", "TSP").depth == 2


def test_program_id_is_content_hash():
    a, b = parse("NEG F0", "TSP"), parse("NEG F0", "TSP")
    assert a.id == b.id and len(a.id) == 16
    assert parse("NEG F0", "CVRP").id != a.id


@settings(max_examples=300, deadline=None)
@given(st.sampled_from(list(Task)), st.integers(0, 2**32 - 1))
def test_parse_serialize_round_trip(task, seed):
    p = random_program(task, seed)
    assert serialize(p.tree) == p.tokens
    assert parse(p.tokens, task) == p


# -- interpretation ------------------------------------------------------------------

def test_neg_f0_picks_nearest():
    f = frame(Task.TSP, [3, 1, 2])
    p = parse("NEG F0", "TSP")
    assert interpret(p, f).tolist() == [-3, -1, -2]
    assert choose(p, f) == 1


def test_protected_division():
    assert interpret(parse("DIV C1.0 F0", "TSP"), frame(Task.TSP, [0.0])).tolist() == [1e6]
    assert interpret(parse("DIV C1.0 F0", "TSP"), frame(Task.TSP, [-1e-9])).tolist() == [-1e6]


def test_protected_log_and_sqrt():
    f = frame(Task.TSP, [0.0, -4.0])
    assert np.allclose(interpret(parse("LOG F0", "TSP"), f), [np.log(1e-6), np.log(4.0)])
    assert np.allclose(interpret(parse("SQRT F0", "TSP"), f), [0.0, 2.0])


def test_constant_program_ties_to_lowest_feasible():
    f = frame(Task.TSP, [5, 4, 3], feasible=[False, True, True])
    assert choose(parse("C0.5", "TSP"), f) == 1


def test_nonfinite_score_invalidates():
    f = frame(Task.TSP, [1000.0, 1.0])
    with pytest.raises(InvalidProgram):
        choose(parse("EXP F0", "TSP"), f)


def test_nonfinite_on_infeasible_row_is_ignored():
    f = frame(Task.TSP, [1000.0, 1.0], feasible=[False, True])
    assert choose(parse("EXP F0", "TSP"), f) == 1


def test_select_requires_feasible():
    with pytest.raises(ValueError):
        select(np.zeros(2), np.zeros(2, dtype=bool))


def test_task_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        interpret(parse("F0", "TSP"), frame(Task.OBP, [1.0]))


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(list(Task)), st.integers(0, 2**32 - 1))
def test_interpret_is_pure(task, seed):
    p = random_program(task, seed)
    for f in probe_frames(task):
        a, b = interpret(p, f), interpret(p, f)
        assert a.tobytes() == b.tobytes()


# -- sampling ------------------------------------------------------------------------

def test_sample_depth_one_is_single_token():
    rng = np.random.default_rng(0)
    for _ in range(50):
        assert len(sample_seed_program("TSP", rng, max_depth=1)) == 1


@pytest.mark.parametrize("task", list(Task))
def test_sample_validity_rate(task):
    rng = np.random.default_rng(1)
    valid = 0
    for _ in range(1000):
        p = from_tree(random_tree(task, rng, 4), task)
        valid += finite_on(p, probe_frames(task))
    assert valid / 1000 >= 0.95


def test_sample_determinism():
    a = sample_seed_program("CVRP", np.random.default_rng(42))
    b = sample_seed_program("CVRP", np.random.default_rng(42))
    assert a == b


def test_sample_fallback_when_everything_is_invalid():
    # A probe frame with a huge feature makes nearly every program non-finite, but
    # the sampler must still terminate with a parseable program.
    f = frame(Task.TSP, [np.inf])
    p = sample_seed_program("TSP", np.random.default_rng(0), probes=[f])
    assert p.tokens in {("NEG", "F0")} or finite_on(p, [f])


# -- augmentation --------------------------------------------------------------------

def test_syntactic_swap_example():
    p = parse("ADD F0 F1", "TSP")
    seen = set()
    for s in range(200):
        q = augment(p, Strategy.SYNTACTIC, np.random.default_rng(s))
        seen.add(q.tokens)
        for f in probe_frames("TSP"):
            assert np.array_equal(interpret(p, f), interpret(q, f))
    assert ("ADD", "F1", "F0") in seen


def test_parametric_example():
    p = parse("MUL C0.5 F0", "TSP")
    outs = {augment(p, Strategy.PARAMETRIC, np.random.default_rng(s)).tokens for s in range(100)}
    assert outs == {("MUL", "C0.2", "F0"), ("MUL", "C1.0", "F0")}


def test_behavioral_example():
    p = parse("MIN F0 F1", "TSP")
    outs = {augment(p, Strategy.BEHAVIORAL, np.random.default_rng(s)).tokens for s in range(200)}
    assert ("MAX", "F0", "F1") in outs
    assert p.tokens not in outs


def test_all_augmented_outputs_parse_10k():
    rng = np.random.default_rng(2024)
    tasks = list(Task)
    for i in range(10_000):
        task = tasks[i % 4]
        p = from_tree(random_tree(task, rng, 5), task)
        for strategy in Strategy:
            q = augment(p, strategy, rng)
            assert parse(q.tokens, task) == q
            if strategy is Strategy.SYNTACTIC:
                for f in probe_frames(task)[:2]:
                    a, b = interpret(p, f), interpret(q, f)
                    assert np.array_equal(a, b, equal_nan=True)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(list(Task)), st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1))
def test_syntactic_preserves_argmax(task, pseed, aseed):
    p = random_program(task, pseed)
    q = augment(p, Strategy.SYNTACTIC, np.random.default_rng(aseed))
    assert q != p
    for f in probe_frames(task):
        sp, sq = interpret(p, f), interpret(q, f)
        if np.isfinite(sp[f.feasible]).all():
            assert select(sp, f.feasible) == select(sq, f.feasible)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(list(Task)), st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1),
       st.sampled_from([Strategy.PARAMETRIC, Strategy.BEHAVIORAL]))
def test_non_syntactic_changes_program(task, pseed, aseed, strategy):
    p = random_program(task, pseed)
    q = augment(p, strategy, np.random.default_rng(aseed))
    has_site = strategy is Strategy.PARAMETRIC or any(
        t.startswith("F") or t in ("MIN", "MAX", "ADD", "SUB") for t in p.tokens)
    assert (q != p) == has_site


def test_augment_without_site_returns_input():
    p = parse("C0.5", "TSP")
    # a bare constant has no feature or aggregation site
    assert augment(p, Strategy.BEHAVIORAL, np.random.default_rng(0)) == p


# -- dedupe and corpus ---------------------------------------------------------------

def test_dedupe_behavioral_and_exact():
    a = parse("NEG F0", "TSP")
    b = parse("SUB C0.0 F0", "TSP")
    c = parse("F1", "TSP")
    out = dedupe([a, b, a, c])
    assert out == [a, c]


def test_dedupe_keeps_distinct_behaviors():
    ps = [parse("NEG F0", "TSP"), parse("NEG F1", "TSP")]
    assert dedupe(ps) == ps


def test_corpus_round_trip(tmp_path):
    entries = [CorpusEntry(parse("NEG F0", "TSP"), "seed", -6.5),
               CorpusEntry(parse("DIV F2 F0", "KNAPSACK"), "behavioral", None)]
    path = tmp_path / "c.jsonl"
    write_corpus(path, entries)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert set(json.loads(lines[0])) == {"id", "task", "tokens", "source", "score"}
    back = read_corpus(path)
    assert [e.program for e in back] == [e.program for e in entries]
    assert [e.score for e in back] == [-6.5, None]


def test_corpus_rejects_tampered_id(tmp_path):
    path = tmp_path / "c.jsonl"
    obj = CorpusEntry(parse("NEG F0", "TSP"), "seed").to_json()
    obj["id"] = "0" * 16
    path.write_text(json.dumps(obj) + "\n", encoding="utf-8")
    with pytest.raises(ValueError, match="mismatch"):
        read_corpus(path)
