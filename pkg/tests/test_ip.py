import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from followback import (
    GuardError,
    ProductModel,
    SolverLimitError,
    brute_force_oracle,
    build_formulation,
    export_lp,
    induced_dag,
    is_acyclic,
    optimize_policy,
    solve,
    synth_graph,
)
from conftest import make_graph

highspy = pytest.importorskip("highspy")

BETA = 0.28


def edge_model():
    g = make_graph("ut", [("u", "t")], targets="t")
    return g, ProductModel(BETA, {"u": 0.5, "t": 0.2})


def rows(model):
    """Constraints as {frozenset of (name, coef)}: rhs, for order-free comparison."""
    return {frozenset((model.names[i], a) for i, a in c.terms): c.rhs for c in model.constraints}


def check_solution(model, sol, pm):
    values = sol.values
    assert model.violations(values) == []
    for (u, v), j in model.y_index.items():
        if values[j]:
            assert values[model.x_index[u]] and values[model.x_index[v]]
    for (u, v, t), k in model.z_index.items():
        if values[k]:
            assert values[model.y_index[(u, v)]] and values[model.y_index[(v, t)]]
    assert sum(values[i] for i in model.x_index.values()) <= model.budget
    assert is_acyclic(sol.chosen_edges)
    # objective recomputed from the assignment, independently of the model's coefficients
    terms = [pm.g(t) for t in sol.selected_vertices if t in model.targets]
    terms += [pm.beta * pm.g(u) * pm.g(t) for u, t in sol.chosen_edges if t in model.targets]
    terms += [pm.beta**2 * pm.g(u) * pm.g(v) * pm.g(t) for u, v, t in sol.chosen_paths]
    assert sol.objective_value == math.fsum(terms)


# -- formulation ------------------------------------------------------------------


def test_order0_shape():
    g = synth_graph("erdos-renyi-directed", 9, 0.3, target_count=3, seed=0)
    m = build_formulation(g, None, 2, 0)
    assert m.n_vars == 9 and len(m.constraints) == 1 and m.constraints[0].kind == "budget"


def test_order1_single_edge_by_hand():
    g, pm = edge_model()
    m = build_formulation(g, None, 2, 1, pm)
    obj = {n: c for n, c in zip(m.names, m.objective)}
    assert obj == {"x_t": 0.2, "x_u": 0.0, "y_u_t": pytest.approx(0.028, abs=1e-17)}
    c_y = obj["y_u_t"]
    assert rows(m) == {
        frozenset({("x_u", 1.0), ("x_t", 1.0)}): 2.0,
        frozenset({("y_u_t", 1.0), ("x_u", -1.0)}): 0.0,
        frozenset({("y_u_t", 1.0), ("x_t", -1.0)}): 0.0,
        frozenset({("x_t", 0.2), ("y_u_t", c_y)}): 1.0,
    }


def test_order2_chain_has_one_path_variable():
    g = make_graph("abt", [("a", "b"), ("b", "t")], targets="t")
    pm = ProductModel(BETA, {"a": 0.3, "b": 0.4, "t": 0.1})
    m = build_formulation(g, None, 3, 2, pm)
    assert list(m.z_index) == [("a", "b", "t")]
    assert m.objective[m.z_index[("a", "b", "t")]] == BETA * BETA * 0.3 * 0.4 * 0.1
    # (a,b) carries no direct weight but is needed by the path
    assert m.objective[m.y_index[("a", "b")]] == 0.0


def test_all_coefficients_non_negative():
    g = synth_graph("two-hop", 40, 0.05, target_count=3, seed=1)
    m = build_formulation(g, None, 10, 2)
    assert min(m.objective) >= 0
    assert all(t in m.targets for _, _, t in m.z_index)
    assert all(g.has_edge(*e) for e in m.y_index)


def test_formulation_errors():
    g, pm = edge_model()
    with pytest.raises(KeyError):
        build_formulation(g, ["zz"], 1, 1, pm)
    with pytest.raises(ValueError):
        build_formulation(g, None, -1, 1, pm)
    with pytest.raises(ValueError):
        build_formulation(g, None, 1, 3, pm)


def test_variable_names_sanitised_and_unique():
    g = make_graph(["a b", "a_b", "t"], [("a b", "t"), ("a_b", "t")], targets="t")
    m = build_formulation(g, None, 2, 1)
    assert len(set(m.names)) == m.n_vars
    assert all(" " not in n for n in m.names)


# -- solving -------------------------------------------------------------------------


def test_order0_picks_largest():
    g = make_graph("abc", [], targets="abc")
    pm = ProductModel(BETA, {"a": 0.3, "b": 0.2, "c": 0.1})
    sol = solve(build_formulation(g, None, 2, 0, pm))
    assert sorted(sol.selected_vertices) == ["a", "b"]
    assert sol.objective_value == 0.5 and sol.status == "optimal"


def test_single_edge_solution():
    g, pm = edge_model()
    sol = solve(build_formulation(g, None, 2, 1, pm))
    assert sol.assignment == {"x_t": 1, "x_u": 1, "y_u_t": 1}
    assert sol.objective_value == pytest.approx(0.228, abs=1e-15)
    ref = brute_force_oracle(g, None, 2, 1, pm)
    assert ref.assignment == sol.assignment and ref.objective_value == sol.objective_value


def test_two_cycle_between_targets():
    g = make_graph("ut", [("u", "t"), ("t", "u")], targets="ut")
    pm = ProductModel(BETA, {"u": 0.4, "t": 0.3})
    model = build_formulation(g, None, 2, 1, pm)
    sol = solve(model)
    assert sol.stats["lazy_constraints"] == 1
    assert sol.assignment["y_u_t"] + sol.assignment["y_t_u"] <= 1
    assert is_acyclic(sol.chosen_edges)
    # all 16 assignments of (x_u, x_t, y_ut, y_tu)
    best = max(
        0.4 * xu + 0.3 * xt + BETA * 0.12 * (yut + ytu)
        for xu, xt, yut, ytu in itertools.product((0, 1), repeat=4)
        if yut <= min(xu, xt) and ytu <= min(xu, xt) and yut + ytu <= 1
    )
    assert sol.objective_value == pytest.approx(best, abs=1e-15)
    check_solution(model, sol, pm)


def test_empty_graph_and_zero_budget():
    g = make_graph([], [])
    assert brute_force_oracle(g, [], 1, 1).objective_value == 0
    assert solve(build_formulation(g, [], 1, 1)).objective_value == 0
    g, pm = edge_model()
    for fn in (lambda: solve(build_formulation(g, None, 0, 2, pm)), lambda: brute_force_oracle(g, None, 0, 2, pm)):
        sol = fn()
        assert sol.objective_value == 0 and set(sol.assignment.values()) == {0}
        assert sol.status == "budget-zero"


def random_instance(seed, n=None, order=None):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(2, 11))
    order = int(rng.integers(0, 3)) if order is None else order
    g = synth_graph(
        "erdos-renyi-directed", n, float(rng.uniform(0.08, 0.3)), target_count=int(rng.integers(1, n + 1)), seed=seed
    )
    pm = ProductModel.from_graph(g)
    return g, pm, int(rng.integers(1, n + 1)), order


@pytest.mark.parametrize("seed", range(40))
def test_solver_matches_oracle(seed):
    g, pm, m, order = random_instance(seed)
    try:
        ref = brute_force_oracle(g, None, m, order, pm)
    except GuardError:
        pytest.skip("instance too large for the oracle")
    model = build_formulation(g, None, m, order, pm)
    sol = solve(model)
    assert sol.objective_value == ref.objective_value
    check_solution(model, sol, pm)


@pytest.mark.parametrize("seed", range(15))
def test_binding_caps_match_oracle(seed):
    # large susceptibilities and slope so the probability caps bind
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 8))
    g = synth_graph("erdos-renyi-directed", n, 0.35, target_count=int(rng.integers(1, n)), seed=seed)
    pm = ProductModel(1.5, {v: float(rng.uniform(0.3, 0.95)) for v in g.vertices})
    for order in (1, 2):
        ref = brute_force_oracle(g, None, n, order, pm)
        model = build_formulation(g, None, n, order, pm)
        sol = solve(model)
        assert sol.objective_value == ref.objective_value
        check_solution(model, sol, pm)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_objective_nondecreasing_in_budget(seed):
    g, pm, _, order = random_instance(seed, n=9)
    values = [solve(build_formulation(g, None, m, order, pm)).objective_value for m in range(0, 10)]
    assert all(a <= b for a, b in zip(values, values[1:]))


def test_planted_cycles_terminate():
    # a 3-cycle and a 2-cycle among targets, each vertex with one friend
    ts = ["a", "b", "c", "d", "e"]
    edges = [("a", "b"), ("b", "c"), ("c", "a"), ("d", "e"), ("e", "d")] + [(f"f{t}", t) for t in ts]
    g = make_graph(ts + [f"f{t}" for t in ts], edges, targets=ts)
    pm = ProductModel(BETA, {v: 0.3 for v in g.vertices})
    model = build_formulation(g, None, 10, 1, pm)
    sol = solve(model)
    assert is_acyclic(sol.chosen_edges)
    assert 2 <= sol.stats["lazy_constraints"] <= 2 + 5
    assert sol.objective_value == brute_force_oracle(g, None, 10, 1, pm).objective_value
    check_solution(model, sol, pm)


def test_node_limit():
    g = synth_graph("two-hop", 120, 0.02, target_count=4, seed=0)
    with pytest.raises(SolverLimitError):
        solve(build_formulation(g, None, 30, 2), node_limit=10)


def test_oracle_guard():
    with pytest.raises(GuardError):
        brute_force_oracle(make_graph(15, []), [0], 1, 0)


def test_solution_json():
    g, pm = edge_model()
    doc = solve(build_formulation(g, None, 2, 1, pm)).to_json()
    assert doc["x"] == ["t", "u"] and doc["y"] == [["u", "t"]] and doc["z"] == []
    assert set(doc["stats"]) >= {"nodes", "lazy_constraints"}


# -- LP export --------------------------------------------------------------------------


def read_lp(path):
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    assert h.readModel(str(path)) == highspy.HighsStatus.kOk
    return h


def test_export_order0(tmp_path):
    g = make_graph("abc", [], targets="ab")
    model = build_formulation(g, None, 2, 0)
    export_lp(model, tmp_path / "m.lp")
    text = (tmp_path / "m.lp").read_text()
    assert text.count(" budget:") == 1
    binary = text.split("Binary\n")[1].split("End")[0].split()
    assert sorted(binary) == ["x_a", "x_b", "x_c"]
    assert text.startswith("\\") and "Maximize" in text and "Subject To" in text


def test_export_single_edge_rows(tmp_path):
    g, pm = edge_model()
    export_lp(build_formulation(g, None, 2, 1, pm), tmp_path / "m.lp")
    text = (tmp_path / "m.lp").read_text()
    body = text.split("Subject To\n")[1].split("Binary")[0].strip().splitlines()
    assert len(body) == 4
    h = read_lp(tmp_path / "m.lp")
    assert (h.getNumCol(), h.getNumRow()) == (3, 4)
    h.run()
    assert h.getInfo().objective_function_value == pytest.approx(0.228, abs=1e-12)


@pytest.mark.parametrize("seed", range(8))
def test_export_round_trip_and_cross_solve(tmp_path, seed):
    g, pm, m, order = random_instance(100 + seed, n=12)
    model = build_formulation(g, None, m, order, pm)
    sol = solve(model)
    path = tmp_path / "m.lp"
    export_lp(model, path)
    assert path.read_text().count(" cycle") == len(model.cycle_constraints)
    h = read_lp(path)
    assert (h.getNumCol(), h.getNumRow()) == (model.n_vars, len(model.constraints))
    h.setOptionValue("mip_rel_gap", 0.0)
    h.setOptionValue("mip_abs_gap", 0.0)
    h.run()
    # the exported model holds every cut, so an external solver lands on the same optimum
    assert h.getInfo().objective_function_value == pytest.approx(sol.objective_value, rel=1e-9, abs=1e-12)


# -- end to end ------------------------------------------------------------------------


def test_optimize_single_edge():
    g, pm = edge_model()
    res = optimize_policy(g, None, 2, 1, pm)
    assert res.policy.sequence == ("u", "t")
    assert res.predicted_value == pytest.approx(0.228, abs=1e-15)
    assert res.linear_value == pytest.approx(0.228, abs=1e-15)


def test_optimize_large_budget_selects_everything_on_dag():
    g = synth_graph("random-dag", 10, 0.3, target_count=4, seed=3)
    res = optimize_policy(g, None, 10, 1)
    assert set(res.policy.sequence) == set(g.vertices)
    assert set(res.solution.chosen_edges) == {(u, t) for u, t in g.edges if t in g.targets}
    assert induced_dag(g, res.policy).kept_edges == set(g.edges)


def test_targets_only_barely_beats_baseline():
    from followback import expected_follows, targets_table
    from followback.model import dag_follow_probs_linear

    tab = targets_table()
    ids = list(tab.vertices)
    # a few follow edges among the targets
    edges = [(ids[0], ids[1]), (ids[1], ids[2]), (ids[3], ids[0]), (ids[2], ids[3]), (ids[5], ids[7])]
    g = make_graph(ids, edges, targets=ids, counts={v: (m.friend_count, m.follower_count) for v, m in tab.vertices.items()})
    pm = ProductModel.from_graph(g)
    base = math.fsum(pm.g(t) for t in ids)
    res = optimize_policy(g, None, 11, 1, pm)
    assert base < res.predicted_value < 1.05 * base
    assert res.solution.stats["lazy_constraints"] >= 1
    assert expected_follows(dag_follow_probs_linear(induced_dag(g, res.policy), pm), ids) == pytest.approx(res.linear_value)
