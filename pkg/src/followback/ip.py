"""Integer programs for choosing which vertices and edges the agent uses.

Binary variables:

* ``x_v``  the agent interacts with ``v``;
* ``y_uv`` edge ``(u, v)`` is kept in the interaction DAG;
* ``z_uvt`` both edges of the two-hop path ``u -> v -> t`` are kept (order 2).

The order-``k`` objective sums, over targets, the path weights of paths of at
most ``k`` edges ending at the target: ``g_t x_t``, ``beta g_u g_t y_ut`` and
``beta^2 g_u g_v g_t z_uvt``.  ``y`` variables exist only for edges that can
carry objective weight, ``z`` variables only for two-hop paths that exist in
the graph.  Acyclicity of the kept edges is enforced lazily: the model is
solved without cycle constraints, a shortest cycle among the chosen ``y``
edges becomes a constraint, and the model is re-solved until the chosen edges
form a DAG.
"""
from __future__ import annotations

import heapq
import itertools
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .graph import Policy, SocialGraph, VertexId, find_cycle, id_key, induced_dag
from .model import ProductModel, dag_follow_probs_linear, expected_follows
from .policies import policy_from_dag
from .simulate import GuardError

ORACLE_MAX_VERTICES = 14
ORACLE_MAX_EDGE_VARS = 22
_TOL = 1e-12


class SolverLimitError(RuntimeError):
    """Branch-and-bound exceeded its node limit before proving optimality."""

    def __init__(self, nodes: int, incumbent: float):
        super().__init__(f"node limit of {nodes} reached (best objective so far {incumbent:.6g})")
        self.nodes = nodes
        self.incumbent = incumbent


@dataclass(frozen=True)
class Constraint:
    """``sum(coef * var) <= rhs``."""

    name: str
    terms: tuple[tuple[int, float], ...]
    rhs: float
    kind: str


@dataclass
class MilpModel:
    order: int
    budget: int
    beta: float
    targets: frozenset
    names: list[str] = field(default_factory=list)
    kinds: list[str] = field(default_factory=list)
    keys: list = field(default_factory=list)
    objective: list[float] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    x_index: dict = field(default_factory=dict)
    y_index: dict = field(default_factory=dict)
    z_index: dict = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return len(self.names)

    @property
    def cycle_constraints(self) -> list[Constraint]:
        return [c for c in self.constraints if c.kind == "cycle"]

    def add_var(self, kind: str, key, name: str, coef: float) -> int:
        i = len(self.names)
        self.names.append(name)
        self.kinds.append(kind)
        self.keys.append(key)
        self.objective.append(coef)
        return i

    def add_cycle_constraint(self, cycle: list) -> Constraint:
        edges = list(zip(cycle, cycle[1:] + cycle[:1]))
        terms = tuple((self.y_index[e], 1.0) for e in edges)
        con = Constraint(f"cycle{len(self.cycle_constraints)}", terms, float(len(edges) - 1), "cycle")
        self.constraints.append(con)
        return con

    def evaluate(self, values: list[int]) -> float:
        return math.fsum(c for c, v in zip(self.objective, values) if v)

    def violations(self, values: list[int]) -> list[str]:
        out = []
        for con in self.constraints:
            lhs = math.fsum(a * values[i] for i, a in con.terms)
            if lhs > con.rhs + 1e-9:
                out.append(f"{con.name}: {lhs} > {con.rhs}")
        return out


def _token(v: VertexId) -> str:
    return re.sub(r"[^A-Za-z0-9_.]", "_", str(v))


def build_formulation(
    graph: SocialGraph,
    targets: Iterable[VertexId] | None,
    m: int,
    order: int,
    product_model: ProductModel | None = None,
) -> MilpModel:
    """Assemble the order-0, 1 or 2 model with budget ``m``.

    Constraints: the budget ``sum x <= m``; linking ``y_uv <= x_u``,
    ``y_uv <= x_v``, ``z_uvt <= y_uv``, ``z_uvt <= y_vt``; and for orders 1
    and 2 a per-target cap keeping the linearised follow probability at most
    one.  Cycle constraints are added later by :func:`solve`.
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    if m < 0:
        raise ValueError("budget m must be non-negative")
    targets = frozenset(graph.targets if targets is None else targets)
    for t in targets:
        if t not in graph:
            raise KeyError(f"unknown target {t!r}")
    pm = product_model or ProductModel.from_graph(graph)
    g = pm.g
    beta = pm.beta
    model = MilpModel(order, m, beta, targets)
    used: set[str] = set()

    def unique(name: str) -> str:
        base, k = name, 1
        while name in used:
            name = f"{base}~{k}"
            k += 1
        used.add(name)
        return name

    vertices = sorted(graph.vertices, key=id_key)
    for v in vertices:
        coef = g(v) if v in targets else 0.0
        model.x_index[v] = model.add_var("x", v, unique(f"x_{_token(v)}"), coef)

    edge_key = lambda e: tuple(id_key(a) for a in e)  # noqa: E731
    y_edges: set = set()
    paths: list[tuple] = []
    if order >= 1:
        y_edges = {(u, t) for u, t in graph.edges if t in targets}
    if order == 2:
        for v, t in graph.edges:
            if t not in targets:
                continue
            for u in graph.parents(v):
                if u != t:
                    paths.append((u, v, t))
                    y_edges.add((u, v))
    for u, v in sorted(y_edges, key=edge_key):
        coef = beta * g(u) * g(v) if v in targets else 0.0
        model.y_index[(u, v)] = model.add_var("y", (u, v), unique(f"y_{_token(u)}_{_token(v)}"), coef)
    for u, v, t in sorted(paths, key=edge_key):
        coef = beta * beta * g(u) * g(v) * g(t)
        model.z_index[(u, v, t)] = model.add_var(
            "z", (u, v, t), unique(f"z_{_token(u)}_{_token(v)}_{_token(t)}"), coef
        )

    cons = model.constraints
    cons.append(Constraint("budget", tuple((i, 1.0) for i in model.x_index.values()), float(m), "budget"))
    for (u, v), j in model.y_index.items():
        cons.append(Constraint(f"link_{model.names[j]}_a", ((j, 1.0), (model.x_index[u], -1.0)), 0.0, "link"))
        cons.append(Constraint(f"link_{model.names[j]}_b", ((j, 1.0), (model.x_index[v], -1.0)), 0.0, "link"))
    for (u, v, t), k in model.z_index.items():
        cons.append(Constraint(f"link_{model.names[k]}_a", ((k, 1.0), (model.y_index[(u, v)], -1.0)), 0.0, "link"))
        cons.append(Constraint(f"link_{model.names[k]}_b", ((k, 1.0), (model.y_index[(v, t)], -1.0)), 0.0, "link"))
    if order >= 1:
        into: dict = {t: [] for t in targets}
        for (u, v), j in model.y_index.items():
            if v in targets:
                into[v].append(j)
        for (u, v, t), k in model.z_index.items():
            into[t].append(k)
        for t in sorted(targets, key=id_key):
            xi = model.x_index[t]
            terms = ((xi, model.objective[xi]),) + tuple((j, model.objective[j]) for j in into[t])
            cons.append(Constraint(f"cap_{model.names[xi]}", terms, 1.0, "cap"))
    return model


@dataclass
class Solution:
    assignment: dict[str, int]
    objective_value: float
    status: str
    stats: dict = field(default_factory=dict)
    values: list[int] = field(default_factory=list, repr=False)
    model: MilpModel | None = field(default=None, repr=False)

    @property
    def selected_vertices(self) -> list:
        return [k for i, k in enumerate(self.model.keys) if self.model.kinds[i] == "x" and self.values[i]]

    @property
    def chosen_edges(self) -> list:
        return [k for i, k in enumerate(self.model.keys) if self.model.kinds[i] == "y" and self.values[i]]

    @property
    def chosen_paths(self) -> list:
        return [k for i, k in enumerate(self.model.keys) if self.model.kinds[i] == "z" and self.values[i]]

    def to_json(self) -> dict:
        return {
            "objective": self.objective_value,
            "status": self.status,
            "x": self.selected_vertices,
            "y": [list(e) for e in self.chosen_edges],
            "z": [list(p) for p in self.chosen_paths],
            "stats": dict(self.stats),
        }


class _BranchAndBound:
    """Depth-first branch-and-bound for one round of the lazy loop.

    Vertices (``x``) are decided first, always branching on the undecided
    vertex with the largest potential: its own objective coefficient plus
    every live ``y``/``z`` coefficient that needs it.  The bound relaxes caps
    and cycle constraints: committed value, plus every live edge/path term
    whose vertices are all selected, plus the best ``r`` potentials for the
    ``r`` remaining budget slots.  Each live term is credited to all of its
    undecided vertices, so any completion is covered.  With the vertex set
    fixed, ``y`` then ``z`` variables are branched in descending order of
    value, checking caps and cycle constraints as they fill.  Value 1 is
    always tried before 0 and only strictly better incumbents replace the
    current one, which makes the search order the tie-break.
    """

    def __init__(self, model: MilpModel, node_limit: int):
        self.model = model
        self.node_limit = node_limit
        n = model.n_vars
        self.c = model.objective
        self.kind = model.kinds
        self.x_vars = [i for i in range(n) if self.kind[i] == "x"]
        self.req_x: list[tuple[int, ...]] = [()] * n
        self.touch: list[list[int]] = [[] for _ in range(n)]
        self.zs_of: list[list[int]] = [[] for _ in range(n)]
        self.req_y: list[tuple[int, ...]] = [()] * n
        xi = model.x_index
        for (u, v), j in model.y_index.items():
            self.req_x[j] = (xi[u], xi[v])
        for (u, v, t), k in model.z_index.items():
            self.req_x[k] = tuple(dict.fromkeys((xi[u], xi[v], xi[t])))
            self.req_y[k] = (model.y_index[(u, v)], model.y_index[(v, t)])
            self.zs_of[model.y_index[(u, v)]].append(k)
            self.zs_of[model.y_index[(v, t)]].append(k)
        for j in range(n):
            for a in self.req_x[j]:
                self.touch[a].append(j)
        self.edge_vars = [j for j in range(n) if self.kind[j] != "x"]
        # caps and cycle cuts: var -> [(row, coef)]
        self.rows: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        self.rhs: list[float] = []
        self.cuts = [tuple(i for i, _ in con.terms) for con in model.constraints if con.kind == "cycle"]
        for con in model.constraints:
            if con.kind not in ("cap", "cycle"):
                continue
            r = len(self.rhs)
            self.rhs.append(con.rhs)
            for i, a in con.terms:
                self.rows[i].append((r, a))
        self.budget = model.budget
        self.val = [-1] * n
        self.lhs = [0.0] * len(self.rhs)
        self.obj = 0.0
        self.count = 0
        self.trail: list[int] = []
        self.nodes = 0
        self.best = -math.inf
        self.best_values: list[int] | None = None

    # -- assignment with undo ------------------------------------------------

    def _set1(self, i: int) -> bool:
        self.val[i] = 1
        self.trail.append(i)
        self.obj += self.c[i]
        ok = True
        for r, a in self.rows[i]:
            self.lhs[r] += a
            if self.lhs[r] > self.rhs[r] + 1e-12:
                ok = False
        if self.kind[i] == "x":
            self.count += 1
            if self.count >= self.budget:
                for a in self.x_vars:
                    if self.val[a] == -1:
                        self._set0(a)
        return ok

    def _set0(self, i: int) -> None:
        stack = [i]
        while stack:
            a = stack.pop()
            if self.val[a] != -1:
                continue
            self.val[a] = 0
            self.trail.append(a)
            if self.kind[a] == "x":
                stack.extend(j for j in self.touch[a] if self.val[j] == -1)
            elif self.kind[a] == "y":
                stack.extend(k for k in self.zs_of[a] if self.val[k] == -1)

    def _undo(self, mark: int) -> None:
        trail = self.trail
        while len(trail) > mark:
            i = trail.pop()
            if self.val[i] == 1:
                self.obj -= self.c[i]
                for r, a in self.rows[i]:
                    self.lhs[r] -= a
                if self.kind[i] == "x":
                    self.count -= 1
            self.val[i] = -1

    # -- search ----------------------------------------------------------------

    def run(self) -> None:
        if self.budget <= 0:
            for a in self.x_vars:
                self._set0(a)
        limit = sys.getrecursionlimit()
        sys.setrecursionlimit(max(limit, 4 * self.model.n_vars + 1000))
        try:
            self._vertex_phase()
        finally:
            sys.setrecursionlimit(limit)

    def _tick(self) -> None:
        self.nodes += 1
        if self.nodes > self.node_limit:
            raise SolverLimitError(self.node_limit, self.best)

    def _vertex_phase(self) -> None:
        self._tick()
        val = self.val
        und = [a for a in self.x_vars if val[a] == -1]
        if not und:
            self._edge_phase()
            return
        pot = {a: self.c[a] for a in und}
        free = []
        free_set = set()
        for j in self.edge_vars:
            if val[j] != -1:
                continue
            open_ends = [a for a in self.req_x[j] if val[a] == -1]
            if open_ends:
                for a in open_ends:
                    pot[a] += self.c[j]
            else:
                free.append(self.c[j])
                free_set.add(j)
        # a cycle whose edges are all free loses at least its cheapest edge;
        # only disjoint cycles are charged so the bound stays admissible
        used: set = set()
        for cut in self.cuts:
            if free_set.issuperset(cut) and used.isdisjoint(cut):
                used.update(cut)
                free.append(-min(self.c[j] for j in cut))
        slots = self.budget - self.count
        bound = self.obj + math.fsum(free) + math.fsum(heapq.nlargest(slots, pot.values()))
        if bound <= self.best + _TOL:
            return
        pick = min(und, key=lambda a: (-pot[a], a))
        mark = len(self.trail)
        if self._set1(pick):
            self._vertex_phase()
        self._undo(mark)
        self._set0(pick)
        self._vertex_phase()
        self._undo(mark)

    def _edge_phase(self) -> None:
        val = self.val
        ys = [j for j in self.edge_vars if val[j] == -1 and self.kind[j] == "y"]
        zs = [k for k in self.edge_vars if val[k] == -1 and self.kind[k] == "z"]
        weight = {j: self.c[j] + sum(self.c[k] for k in self.zs_of[j] if val[k] == -1) for j in ys}
        ys.sort(key=lambda j: (-weight[j], j))
        zs.sort(key=lambda k: (-self.c[k], k))
        self._edge_step(ys + zs, 0)

    def _edge_step(self, order: list[int], k: int) -> None:
        self._tick()
        val = self.val
        while k < len(order) and val[order[k]] != -1:
            k += 1
        if k == len(order):
            if self.obj > self.best + _TOL:
                self.best = self.obj
                self.best_values = list(val)
            return
        bound = self.obj + math.fsum(self.c[j] for j in order[k:] if val[j] == -1)
        if bound <= self.best + _TOL:
            return
        j = order[k]
        mark = len(self.trail)
        can_set = all(val[y] == 1 for y in self.req_y[j])
        if can_set and self._set1(j):
            self._edge_step(order, k + 1)
        self._undo(mark)
        self._set0(j)
        self._edge_step(order, k + 1)
        self._undo(mark)


def solve(model: MilpModel, graph: SocialGraph | None = None, node_limit: int = 5_000_000) -> Solution:
    """Solve ``model`` exactly, adding violated cycle constraints lazily.

    Each round runs branch-and-bound to optimality, then looks for a
    shortest directed cycle among the chosen ``y`` edges.  If one exists its
    constraint (at most ``|C| - 1`` of the cycle's edges) is added to the
    model and the round repeats; otherwise the incumbent is optimal.
    ``graph`` is accepted for symmetry with the other entry points; the model
    carries everything the solver needs.
    """
    rounds = 0
    total_nodes = 0
    added = 0
    while True:
        rounds += 1
        bb = _BranchAndBound(model, node_limit)
        bb.run()
        total_nodes += bb.nodes
        values = [max(v, 0) for v in bb.best_values]
        chosen = [model.keys[j] for j in model.y_index.values() if values[j]]
        cycle = find_cycle(chosen)
        if cycle is None:
            break
        model.add_cycle_constraint(cycle)
        added += 1
    status = "budget-zero" if model.budget == 0 else "optimal"
    assignment = {name: values[i] for i, name in enumerate(model.names)}
    stats = {"nodes": total_nodes, "lazy_constraints": added, "rounds": rounds}
    return Solution(assignment, model.evaluate(values), status, stats, values, model)


def _has_cycle(edges: list[tuple]) -> bool:
    succ: dict = {}
    for u, v in edges:
        succ.setdefault(u, []).append(v)
    state: dict = {}

    def visit(a) -> bool:
        state[a] = 1
        for b in succ.get(a, ()):
            s = state.get(b, 0)
            if s == 1 or (s == 0 and visit(b)):
                return True
        state[a] = 2
        return False

    return any(state.get(a, 0) == 0 and visit(a) for a in list(succ))


def brute_force_oracle(
    graph: SocialGraph,
    targets: Iterable[VertexId] | None,
    m: int,
    order: int,
    product_model: ProductModel | None = None,
) -> Solution:
    """Exhaustive reference optimum for small instances.

    Enumerates every subset of the edges that can carry objective weight,
    skips cyclic subsets and those whose endpoints exceed the budget, picks
    the best cap-feasible set of two-hop paths per target, and spends any
    leftover budget on the most susceptible unused targets.  Values are
    computed from the susceptibilities directly, not from the model's
    coefficients.
    """
    if len(graph) > ORACLE_MAX_VERTICES:
        raise GuardError(f"oracle is limited to {ORACLE_MAX_VERTICES} vertices, got {len(graph)}")
    model = build_formulation(graph, targets, m, order, product_model)
    targets = model.targets
    pm = product_model or ProductModel.from_graph(graph)
    g, beta = pm.g, pm.beta
    candidates = list(model.y_index)
    if len(candidates) > ORACLE_MAX_EDGE_VARS:
        raise GuardError(f"oracle is limited to {ORACLE_MAX_EDGE_VARS} edge variables, got {len(candidates)}")
    paths = list(model.z_index)
    best_value = -math.inf
    best: tuple | None = None
    for mask in range(1 << len(candidates)):
        chosen = [e for b, e in enumerate(candidates) if mask >> b & 1]
        ends = {a for e in chosen for a in e}
        if len(ends) > m:
            continue
        if chosen and _has_cycle(chosen):
            continue
        chosen_set = set(chosen)
        terms = [g(t) for t in ends if t in targets]
        terms += [beta * g(u) * g(v) for u, v in chosen if v in targets]
        picked_paths = []
        feasible = True
        for t in targets:
            if t not in ends:
                continue
            load = g(t) + math.fsum(beta * g(u) * g(t) for u, v in chosen if v == t)
            if load > 1.0 + 1e-12:
                feasible = False
                break
            live = [p for p in paths if p[2] == t and (p[0], p[1]) in chosen_set and (p[1], t) in chosen_set]
            weights = [beta * beta * g(u) * g(v) * g(t) for u, v, _ in live]
            best_sub, best_w = (), 0.0
            for r in range(1, len(live) + 1):
                for sub in itertools.combinations(range(len(live)), r):
                    w = math.fsum(weights[i] for i in sub)
                    if load + w <= 1.0 + 1e-12 and w > best_w:
                        best_sub, best_w = sub, w
            picked_paths += [live[i] for i in best_sub]
            terms += [weights[i] for i in best_sub]
        if not feasible:
            continue
        spare = sorted((t for t in targets if t not in ends), key=lambda t: (-g(t), id_key(t)))
        fill = spare[: m - len(ends)]
        terms += [g(t) for t in fill]
        value = math.fsum(terms)
        if value > best_value + 1e-15:
            best_value = value
            best = (ends | set(fill), chosen, picked_paths)
    values = [0] * model.n_vars
    vertices, edges, picked = best
    for v in vertices:
        values[model.x_index[v]] = 1
    for e in edges:
        values[model.y_index[e]] = 1
    for p in picked:
        values[model.z_index[p]] = 1
    status = "budget-zero" if m == 0 else "optimal"
    assignment = {name: values[i] for i, name in enumerate(model.names)}
    return Solution(assignment, best_value, status, {"enumerated": 1 << len(candidates)}, values, model)


def _fmt(a: float) -> str:
    return repr(float(a))


def _lp_expr(terms: Iterable[tuple[int, float]], names: list[str]) -> str:
    parts = []
    for i, a in terms:
        sign = "-" if a < 0 else "+"
        parts.append(f"{sign} {_fmt(abs(a))} {names[i]}")
    if not parts:
        return "0"
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def export_lp(model: MilpModel, path: str | Path) -> None:
    """Write the model in CPLEX LP text format, cycle constraints included."""
    names = model.names
    lines = [f"\\ follow-back model, order {model.order}, budget {model.budget}", "Maximize"]
    obj_terms = [(i, c) for i, c in enumerate(model.objective) if c != 0.0]
    lines.append(" obj: " + _lp_expr(obj_terms, names))
    lines.append("Subject To")
    for con in model.constraints:
        lines.append(f" {con.name}: {_lp_expr(con.terms, names)} <= {_fmt(con.rhs)}")
    lines.append("Binary")
    lines.extend(f" {n}" for n in names)
    lines.append("End")
    Path(path).write_text("\n".join(lines) + "\n")


def _extend_acyclic(graph: SocialGraph, selected: list, chosen: list) -> list:
    """Add every other graph edge among ``selected`` that keeps the set acyclic.

    Edges are tried in id order; an edge ``(u, v)`` is skipped when ``u`` is
    already reachable from ``v``.
    """
    succ: dict = {v: set() for v in selected}
    kept = list(chosen)
    for u, v in chosen:
        succ[u].add(v)
    inside = set(selected)
    extra = sorted(
        ((u, v) for u, v in graph.edges if u in inside and v in inside and v not in succ[u]),
        key=lambda e: (id_key(e[0]), id_key(e[1])),
    )
    for u, v in extra:
        seen, stack = {v}, [v]
        while stack and u not in seen:
            for w in succ[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        if u not in seen:
            succ[u].add(v)
            kept.append((u, v))
    return kept


@dataclass
class OptimizationResult:
    policy: Policy
    predicted_value: float
    linear_value: float
    solution: Solution
    model: MilpModel


def optimize_policy(
    graph: SocialGraph,
    targets: Iterable[VertexId] | None,
    m: int,
    order: int,
    product_model: ProductModel | None = None,
    node_limit: int = 5_000_000,
) -> OptimizationResult:
    """Solve the order-``order`` model and turn the chosen DAG into a policy.

    The policy is a linear extension of the chosen edges, extended by any
    other edges among the selected vertices that keep it acyclic (edges
    without variables, such as those between non-targets, still help once
    respected).  ``predicted_value`` is the solver objective.  ``linear_value`` evaluates
    the DAG the policy actually induces on the full graph (which may keep
    more edges than the model chose) with the exact linear-model recursion.
    """
    pm = product_model or ProductModel.from_graph(graph)
    model = build_formulation(graph, targets, m, order, pm)
    sol = solve(model, graph, node_limit)
    selected = sol.selected_vertices
    kept = _extend_acyclic(graph, selected, sol.chosen_edges)
    policy = policy_from_dag(graph, selected, kept, model.targets, f"ip-order{order}")
    dag = induced_dag(graph, policy)
    probs = dag_follow_probs_linear(dag, pm)
    linear = expected_follows(probs, [t for t in model.targets if t in set(policy.sequence)])
    return OptimizationResult(policy, sol.objective_value, linear, sol, model)
