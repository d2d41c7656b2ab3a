"""Baseline interaction policies and policies derived from optimiser DAGs."""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .graph import CyclicGraphError, Policy, SocialGraph, VertexId, find_cycle, id_key

DAMPING = 1e-6


class ConvergenceError(RuntimeError):
    def __init__(self, iterations: int, residual: float):
        super().__init__(f"power iteration did not converge after {iterations} iterations (residual {residual:.3g})")
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class CentralityScores:
    scores: Mapping[VertexId, float]
    iterations: int
    residual: float


def _budgeted(non_targets: list, targets: list, budget: int | None) -> tuple:
    if budget is None:
        return tuple(non_targets + targets)
    if budget < 0:
        raise ValueError("budget must be non-negative")
    if budget <= len(targets):
        return tuple(targets[:budget])
    return tuple(non_targets[: budget - len(targets)] + targets)


def random_append(
    graph: SocialGraph, targets: Iterable[VertexId] | None = None, seed: int = 0, budget: int | None = None
) -> Policy:
    """Random order over non-targets, then a random order over the targets.

    With ``budget`` the policy keeps every target (or the first ``budget`` of
    them) and fills the remaining slots from the front of the non-target order.
    """
    targets = set(graph.targets if targets is None else targets)
    for t in targets:
        if t not in graph:
            raise KeyError(f"unknown target {t!r}")
    rng = np.random.default_rng(seed)
    others = [v for v in graph.vertices if v not in targets]
    tlist = [v for v in graph.vertices if v in targets]
    others = [others[i] for i in rng.permutation(len(others))]
    tlist = [tlist[i] for i in rng.permutation(len(tlist))]
    return Policy(_budgeted(others, tlist, budget), "random-append", seed)


def eigenvector_centrality(
    graph: SocialGraph,
    vertex_weights: Mapping[VertexId, float],
    tol: float = 1e-10,
    max_iter: int = 10_000,
) -> CentralityScores:
    """Susceptibility-weighted eigenvector centrality by power iteration.

    The iteration matrix sends score from ``u`` to ``v`` along each edge
    ``(u, v)`` scaled by ``v``'s weight, so influence accumulates at
    susceptible followers.  A uniform teleport term of ``1e-6`` times the mean
    weight keeps the leading eigenvector unique on reducible graphs and makes
    the result invariant to rescaling all weights.  Each step applies the
    shifted operator ``A + lambda I`` (``lambda`` the current growth estimate),
    which has the same leading eigenvector but does not oscillate on periodic
    graphs such as bipartite cycles.  Scores are normalised to a maximum of one.
    """
    n = len(graph)
    if n == 0:
        raise ValueError("graph is empty")
    ids = list(graph.vertices)
    w = np.array([float(vertex_weights[v]) for v in ids])
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise ValueError("vertex weights must be positive and finite")
    src = np.array([graph.index(u) for u, _ in graph.edges], dtype=np.int64)
    dst = np.array([graph.index(v) for _, v in graph.edges], dtype=np.int64)
    edge_w = w[dst]
    teleport = DAMPING * w.mean()
    x = np.ones(n)
    residual = np.inf
    for it in range(1, max_iter + 1):
        y = np.zeros(n)
        np.add.at(y, dst, edge_w * x[src])
        y += teleport * x.sum()
        y += y.max() * x
        y /= y.max()
        residual = float(np.abs(y - x).max())
        x = y
        if residual < tol:
            return CentralityScores(dict(zip(ids, x.tolist())), it, residual)
    raise ConvergenceError(max_iter, residual)


def centrality_policy(
    scores: CentralityScores | Mapping[VertexId, float],
    targets: Iterable[VertexId],
    direction: str = "descending",
    budget: int | None = None,
) -> Policy:
    """Rank non-targets by score, then append the targets ranked the same way.

    Ties break by vertex id so the result is reproducible.
    """
    if isinstance(scores, CentralityScores):
        scores = scores.scores
    if direction not in ("ascending", "descending"):
        raise ValueError("direction must be 'ascending' or 'descending'")
    targets = set(targets)
    missing = targets - set(scores)
    if missing:
        raise KeyError(f"no centrality score for targets {sorted(missing, key=id_key)}")
    sign = -1.0 if direction == "descending" else 1.0

    def rank(vs):
        return sorted(vs, key=lambda v: (sign * scores[v], id_key(v)))

    others = rank(v for v in scores if v not in targets)
    tlist = rank(targets)
    tag = "centrality-desc" if direction == "descending" else "centrality-asc"
    return Policy(_budgeted(others, tlist, budget), tag)


def policy_from_dag(
    graph: SocialGraph,
    selected_vertices: Iterable[VertexId],
    kept_edges: Iterable[tuple],
    targets: Iterable[VertexId] | None = None,
    provenance: str = "",
) -> Policy:
    """A linear extension of the selected DAG that visits non-targets early.

    Whenever the partial order leaves a choice, an available non-target is
    taken before any available target; ties break by vertex id.
    """
    targets = set(graph.targets if targets is None else targets)
    selected = sorted(set(selected_vertices), key=id_key)
    for v in selected:
        if v not in graph:
            raise KeyError(f"unknown vertex {v!r}")
    chosen = set(selected)
    edges = list(kept_edges)
    for u, v in edges:
        if u not in chosen or v not in chosen:
            raise ValueError(f"kept edge ({u!r}, {v!r}) leaves the selected vertices")
        if not graph.has_edge(u, v):
            raise ValueError(f"kept edge ({u!r}, {v!r}) is not a graph edge")
    cycle = find_cycle(edges)
    if cycle is not None:
        raise CyclicGraphError(cycle)
    succ: dict = {v: [] for v in selected}
    indeg = {v: 0 for v in selected}
    for u, v in edges:
        succ[u].append(v)
        indeg[v] += 1
    heap = [((v in targets, id_key(v)), v) for v in selected if indeg[v] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        _, u = heapq.heappop(heap)
        order.append(u)
        for w in succ[u]:
            indeg[w] -= 1
            if indeg[w] == 0:
                heapq.heappush(heap, ((w in targets, id_key(w)), w))
    return Policy(tuple(order), provenance)


def save_policy(policy: Policy, path: str | Path) -> None:
    Path(path).write_text(json.dumps(policy.to_json(), indent=1) + "\n")


def load_policy(path: str | Path) -> Policy:
    return Policy.from_json(json.loads(Path(path).read_text()))
