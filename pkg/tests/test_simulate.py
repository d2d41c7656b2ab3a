import csv
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

import followback.simulate as sim
from followback import (
    GuardError,
    LogisticCoefficients,
    Policy,
    ProductModel,
    compare_policies,
    exact_policy_value,
    logistic_follow_prob,
    simulate_policy,
    synth_graph,
    write_reports_csv,
)
from conftest import enumerate_outcomes, make_graph, random_dag_edges

CHAIN = make_graph("ut", [("u", "t")], targets="t", counts={"u": (2000, 50), "t": (300, 4000)})


def logistic_prob(graph, coeffs=LogisticCoefficients()):
    return lambda v, k: logistic_follow_prob(k, graph.meta(v).friend_count, graph.meta(v).follower_count, coeffs)


def test_empty_policy():
    r = simulate_policy(CHAIN, [], replications=100)
    assert r.expected_target_follows == 0 and r.standard_error == 0
    assert r.per_target_frequency == {"t": 0.0}


def test_single_isolated_target():
    g = make_graph(["t"], [], targets="t", counts={"t": (0, 0)})
    r = simulate_policy(g, ["t"], replications=10_000, seed=1)
    p = 1 / (1 + math.exp(2.49))
    assert abs(r.per_target_frequency["t"] - p) < 3 * r.standard_error
    assert r.standard_error == pytest.approx(math.sqrt(p * (1 - p) / 10_000), rel=0.1)


def test_chain_closed_form():
    pu = logistic_prob(CHAIN)("u", 0)
    zt = LogisticCoefficients().base_score(300, 4000)
    expected = pu * expit(zt + 0.28) + (1 - pu) * expit(zt)
    r = simulate_policy(CHAIN, ["u", "t"], replications=10_000, seed=2)
    assert abs(r.expected_target_follows - expected) < 3 * r.standard_error
    assert exact_policy_value(CHAIN, ["u", "t"]).expected_follows == pytest.approx(expected, abs=1e-15)


def test_deterministic_and_seed_dependent():
    g = synth_graph("erdos-renyi-directed", 15, 0.2, target_count=3, seed=0)
    p = Policy(tuple(g.vertices))
    a = simulate_policy(g, p, replications=2000, seed=5)
    assert simulate_policy(g, p, replications=2000, seed=5) == a
    assert simulate_policy(g, p, replications=2000, seed=6) != a


def test_batching_does_not_change_results(monkeypatch):
    g = synth_graph("erdos-renyi-directed", 15, 0.2, target_count=3, seed=0)
    p = Policy(tuple(g.vertices))
    a = simulate_policy(g, p, replications=3001, seed=5)
    monkeypatch.setattr(sim, "_CHUNK_DRAWS", 15 * 7)
    assert simulate_policy(g, p, replications=3001, seed=5) == a


def test_prefix_of_replications_is_stable():
    # the first r replications do not depend on how many are run in total
    g = make_graph(["t"], [], targets="t", counts={"t": (0, 0)})
    small = simulate_policy(g, ["t"], replications=500, seed=9)
    u = sim._uniform_block((9, 0), 1, 0, 1000)[:, 0]
    p = logistic_follow_prob(0, 0, 0)
    assert small.expected_target_follows == np.mean(u[:500] < p)


def test_invalid_policy():
    with pytest.raises(KeyError):
        simulate_policy(CHAIN, ["u", "zz"])
    with pytest.raises(ValueError):
        simulate_policy(CHAIN, ["u", "u"])
    with pytest.raises(ValueError):
        simulate_policy(CHAIN, ["u"], replications=0)


def test_report_bounds():
    g = synth_graph("erdos-renyi-directed", 12, 0.3, target_count=4, seed=1)
    r = simulate_policy(g, list(g.vertices), replications=1000)
    assert 0 <= r.expected_target_follows <= 4
    assert all(0 <= f <= 1 for f in r.per_target_frequency.values())
    assert set(r.per_target_frequency) == g.targets
    assert r.policy_length == 12


# -- common random numbers ---------------------------------------------------------


def test_compare_identical_policies():
    g = synth_graph("erdos-renyi-directed", 12, 0.3, target_count=4, seed=1)
    p = Policy(tuple(g.vertices), "x")
    a, b = compare_policies(g, {"a": p, "b": p}, replications=2000, seed=3)
    assert a.expected_target_follows == b.expected_target_follows
    assert a.per_target_frequency == b.per_target_frequency
    c, d = compare_policies(g, {"a": p, "b": p}, replications=2000, seed=3, common_random_numbers=False)
    assert c.expected_target_follows != d.expected_target_follows


def test_crn_shares_draws_per_vertex():
    # a target with no visited friends follows in exactly the same replications
    g = make_graph(["a", "b", "t"], [("a", "b")], targets="t")
    r1, r2 = compare_policies(g, [Policy(("a", "b", "t")), Policy(("t", "b"))], replications=5000)
    assert r1.per_target_frequency["t"] == r2.per_target_frequency["t"]


def test_reports_csv(tmp_path):
    g = synth_graph("erdos-renyi-directed", 8, 0.3, target_count=2, seed=1)
    reps = compare_policies(g, {"p1": Policy(tuple(g.vertices)), "empty": Policy(())}, replications=100)
    write_reports_csv(reps, tmp_path / "r.csv", tmp_path / "t.csv")
    rows = list(csv.DictReader((tmp_path / "r.csv").open()))
    assert list(rows[0]) == list(sim.REPORT_COLUMNS)
    assert rows[1]["policy_id"] == "empty" and float(rows[1]["mean"]) == 0.0
    per = list(csv.DictReader((tmp_path / "t.csv").open()))
    assert len(per) == 4


# -- exact enumeration ---------------------------------------------------------------


def test_exact_product_chain():
    g = make_graph("uv", [("u", "v")], targets="v")
    m = ProductModel(0.28, {"u": 0.5, "v": 0.2})
    fwd = exact_policy_value(g, ["u", "v"], m)
    assert fwd.probabilities["v"] == pytest.approx(0.228, abs=1e-15)
    assert fwd.expected_follows == pytest.approx(0.228, abs=1e-15)
    rev = exact_policy_value(g, ["v", "u"], m)
    assert rev.probabilities["v"] == pytest.approx(0.2, abs=1e-15)


def test_exact_guard():
    g = make_graph(21, [])
    with pytest.raises(GuardError):
        exact_policy_value(g, list(range(21)))


def test_zero_overlap_coefficient_makes_order_irrelevant():
    g = synth_graph("erdos-renyi-directed", 7, 0.4, target_count=3, seed=2)
    c = LogisticCoefficients(beta_overlap=0.0)
    vs = list(g.vertices)
    marg = math.fsum(logistic_follow_prob(0, g.meta(t).friend_count, g.meta(t).follower_count, c) for t in g.targets)
    for perm in itertools.islice(itertools.permutations(vs), 0, 5040, 397):
        assert exact_policy_value(g, perm, c).expected_follows == pytest.approx(marg, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.floats(0, 0.6), st.integers(0, 10_000), st.randoms(use_true_random=False))
def test_exact_matches_outcome_enumeration(n, p, seed, rnd):
    g = synth_graph("erdos-renyi-directed", n, p, target_count=max(1, n // 2), seed=seed)
    order = list(g.vertices)
    rnd.shuffle(order)
    order = order[: rnd.randint(0, n)]
    ours = exact_policy_value(g, order)
    ref = enumerate_outcomes(order, {v: g.parents(v) for v in g.vertices}, logistic_prob(g))
    for v in order:
        assert ours.probabilities[v] == pytest.approx(ref[v], abs=1e-13)


def connected(g, a, b):
    # is there a directed path between a and b in either direction
    def reach(s, t):
        seen, stack = {s}, [s]
        while stack:
            x = stack.pop()
            for y in g.children(x):
                if y == t:
                    return True
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        return False

    return reach(a, b) or reach(b, a)


@pytest.mark.parametrize("seed", range(12))
def test_adjacent_swaps(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 7))
    g = make_graph(n, random_dag_edges(rng, n, 0.5), targets=range(n),
                   counts={v: (int(rng.integers(50, 5000)), int(rng.integers(10, 10**6))) for v in range(n)})
    for perm in itertools.permutations(range(n)):
        base = exact_policy_value(g, perm).expected_follows
        for i in range(n - 1):
            a, b = perm[i], perm[i + 1]
            swapped = perm[:i] + (b, a) + perm[i + 2:]
            value = exact_policy_value(g, swapped).expected_follows
            if not connected(g, a, b):
                assert value == pytest.approx(base, abs=1e-14)
            elif (b, a) in g.edge_set:
                # the swap now respects b -> a
                assert value >= base - 1e-15


@pytest.mark.parametrize("seed", range(4))
def test_monte_carlo_matches_exact(seed):
    g = synth_graph("erdos-renyi-directed", 10, 0.25, target_count=4, seed=seed)
    order = list(g.vertices)
    exact = exact_policy_value(g, order).expected_follows
    r = simulate_policy(g, order, replications=100_000, seed=seed)
    assert abs(r.expected_target_follows - exact) < 4 * r.standard_error


def test_root_frequency_is_zero_overlap_probability():
    g = synth_graph("erdos-renyi-directed", 10, 0.3, target_count=5, seed=3)
    order = list(g.vertices)
    r = simulate_policy(g, order, replications=20_000, seed=1)
    for t in g.targets:
        earlier = set(order[: order.index(t)])
        if not (g.parents(t) & earlier):
            p = logistic_prob(g)(t, 0)
            se = math.sqrt(p * (1 - p) / 20_000)
            assert abs(r.per_target_frequency[t] - p) < 3 * se


def test_product_model_with_general_response():
    g = make_graph("uv", [("u", "v")], targets="v")
    m = ProductModel(0.28, {"u": 0.5, "v": 0.2}, lambda k: (1.0, 1.5)[k])
    assert exact_policy_value(g, ["u", "v"], m).expected_follows == pytest.approx(0.25, abs=1e-15)
