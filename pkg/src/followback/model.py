"""Follow-probability mathematics.

Two models live here.  The logistic model is the ground truth used by the
simulator: a target with overlap ``phi`` follows with probability
``sigmoid(intercept + beta_overlap*phi + beta_log_friend*log10(friends+1)
+ beta_log_follower*log10(followers+1))``.  The product model approximates it
as ``g_v * f(phi)`` with susceptibility ``g_v`` (the zero-overlap follow
probability) and, by default, the linear response ``f(phi) = 1 + beta*phi``.
Under the product model, follow probabilities on a DAG visited in any
topological order have closed forms, implemented below.
"""
from __future__ import annotations

import json
import math
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Mapping

from .graph import InducedDag, SocialGraph, VertexId, enumerate_paths, linear_extension

MAX_DELTA_ORDER = 20
_ONE_MINUS = math.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class LogisticCoefficients:
    """Logistic regression coefficients; defaults are the reference fit."""

    intercept: float = -2.49
    beta_overlap: float = 0.28
    beta_log_friend: float = 0.45
    beta_log_follower: float = -0.63

    def __post_init__(self) -> None:
        for name, value in asdict(self).items():
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"coefficient {name} must be a finite real, got {value!r}")

    def base_score(self, friend_count: int, follower_count: int) -> float:
        """Linear predictor at zero overlap."""
        if friend_count < 0 or follower_count < 0:
            raise ValueError("counts must be non-negative")
        return (
            self.intercept
            + self.beta_log_friend * math.log10(friend_count + 1)
            + self.beta_log_follower * math.log10(follower_count + 1)
        )

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: Mapping) -> LogisticCoefficients:
        unknown = set(doc) - {"intercept", "beta_overlap", "beta_log_friend", "beta_log_follower"}
        if unknown:
            raise ValueError(f"unknown model keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in doc.items()})

    @classmethod
    def load(cls, path: str | Path) -> LogisticCoefficients:
        return cls.from_json(json.loads(Path(path).read_text()))


DEFAULT_COEFFICIENTS = LogisticCoefficients()


def susceptibility(
    friend_count: int, follower_count: int, coeffs: LogisticCoefficients = DEFAULT_COEFFICIENTS
) -> float:
    """Zero-overlap follow probability ``exp(score)``, kept inside (0, 1)."""
    try:
        value = math.exp(coeffs.base_score(friend_count, follower_count))
    except OverflowError:
        value = math.inf
    if not math.isfinite(value):
        raise ValueError("susceptibility is not finite; check the coefficients")
    return min(max(value, sys.float_info.min), _ONE_MINUS)


def logistic_follow_prob(
    overlap: int,
    friend_count: int,
    follower_count: int,
    coeffs: LogisticCoefficients = DEFAULT_COEFFICIENTS,
) -> float:
    if overlap < 0:
        raise ValueError("overlap must be non-negative")
    z = coeffs.base_score(friend_count, follower_count) + coeffs.beta_overlap * overlap
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@dataclass(frozen=True)
class ProductModel:
    """``p(phi, v) = g_v * f(phi)``.

    ``overlap_response`` is ``f``; ``None`` means the linear ``1 + beta*phi``
    that every closed form in this package assumes.
    """

    beta: float
    susceptibility: Mapping[VertexId, float]
    overlap_response: Callable[[int], float] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        for v, g in self.susceptibility.items():
            if not 0.0 < g < 1.0:
                raise ValueError(f"susceptibility of {v!r} must lie in (0, 1), got {g}")

    @classmethod
    def from_graph(
        cls, graph: SocialGraph, coeffs: LogisticCoefficients = DEFAULT_COEFFICIENTS
    ) -> ProductModel:
        g = {v: susceptibility(m.friend_count, m.follower_count, coeffs) for v, m in graph.vertices.items()}
        return cls(coeffs.beta_overlap, g)

    def f(self, phi: int) -> float:
        if self.overlap_response is None:
            return 1.0 + self.beta * phi
        return self.overlap_response(phi)

    def g(self, v: VertexId) -> float:
        try:
            return self.susceptibility[v]
        except KeyError:
            raise KeyError(f"no susceptibility for vertex {v!r}") from None


# ---------------------------------------------------------------------------
# Forward-difference coefficients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeltaTable:
    """Triangle ``a[k][i]`` and the differences ``delta[k] = sum_i a[k][i] f(i)``."""

    a: tuple[tuple[int, ...], ...]
    delta: tuple[float, ...]


def coefficient_triangle(kmax: int) -> tuple[tuple[int, ...], ...]:
    """``a[k][i] = a[k-1][i-1] - a[k-1][i]`` with ``a[0][0] = 1``, zero outside 0..k."""
    if kmax < 0:
        raise ValueError("kmax must be non-negative")
    if kmax > MAX_DELTA_ORDER:
        raise ValueError(f"kmax {kmax} exceeds the guard of {MAX_DELTA_ORDER}")
    rows = [(1,)]
    for k in range(1, kmax + 1):
        prev = rows[-1]
        row = []
        for i in range(k + 1):
            left = prev[i - 1] if i >= 1 else 0
            right = prev[i] if i <= k - 1 else 0
            row.append(left - right)
        rows.append(tuple(row))
    return tuple(rows)


def delta_table(f: Callable[[int], float], kmax: int) -> DeltaTable:
    a = coefficient_triangle(kmax)
    values = [f(i) for i in range(kmax + 1)]
    delta = tuple(math.fsum(c * values[i] for i, c in enumerate(row)) for row in a)
    return DeltaTable(a, delta)


# ---------------------------------------------------------------------------
# DAG evaluators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FollowProbabilities:
    probs: Mapping[VertexId, float]
    contributions: Mapping[VertexId, tuple[float, ...]] | None = None
    clamped: frozenset = frozenset()

    def __getitem__(self, v: VertexId) -> float:
        return self.probs[v]


def _as_dag(dag: InducedDag | SocialGraph) -> InducedDag:
    return InducedDag.from_graph(dag) if isinstance(dag, SocialGraph) else dag


def dag_follow_probs_linear(dag: InducedDag | SocialGraph, model: ProductModel) -> FollowProbabilities:
    """Exact follow probabilities under ``f(phi) = 1 + beta*phi``.

    Processes vertices in topological order with
    ``p_v = g_v * (1 + beta * sum of parent p_u)``.  A value above one is
    clamped, recorded in ``clamped`` and reported with a warning.
    """
    dag = _as_dag(dag)
    order = linear_extension(dag).sequence
    parents = dag.parent_map
    probs: dict[VertexId, float] = {}
    clamped = []
    for v in order:
        p = model.g(v) * (1.0 + model.beta * math.fsum(probs[u] for u in parents[v]))
        if p > 1.0:
            clamped.append(v)
            p = 1.0
        probs[v] = p
    if clamped:
        warnings.warn(f"linear follow probability exceeded 1 for {len(clamped)} vertices; clamped", RuntimeWarning)
    return FollowProbabilities({v: probs[v] for v in dag.vertices}, None, frozenset(clamped))


def path_sum_probs(
    dag: InducedDag | SocialGraph, model: ProductModel, max_len: int | None = None
) -> FollowProbabilities:
    """Per-length contributions ``q[l] = beta**l * sum over length-l paths of prod g``.

    Paths are enumerated explicitly.  With ``max_len = |V| - 1`` (the default)
    the totals equal :func:`dag_follow_probs_linear`; smaller values truncate.
    """
    dag = _as_dag(dag)
    n = len(dag.vertices)
    if max_len is None:
        max_len = max(n - 1, 0)
    if max_len < 0:
        raise ValueError("max_len must be non-negative")
    contributions = {}
    probs = {}
    for v in dag.vertices:
        q = []
        for length, paths in enumerate(enumerate_paths(dag, v, max_len)):
            weight = math.fsum(math.prod(model.g(u) for u in path) for path in paths)
            q.append(model.beta**length * weight)
        contributions[v] = tuple(q)
        probs[v] = math.fsum(q)
    return FollowProbabilities(probs, contributions)


def elementary_symmetric(values: list[float]) -> list[float]:
    """``e[k]`` = sum over k-subsets of the product of their members."""
    e = [1.0] + [0.0] * len(values)
    for x in values:
        for k in range(len(e) - 1, 0, -1):
            e[k] += e[k - 1] * x
    return e


def dag_follow_probs_general(
    dag: InducedDag | SocialGraph,
    susceptibility: Mapping[VertexId, float],
    f: Callable[[int], float],
) -> FollowProbabilities:
    """Follow probabilities for a non-decreasing response ``f``.

    ``p_v = g_v * sum_k delta[k] * e_k(parent probabilities)``, where ``e_k``
    sums products over k-subsets of ``v``'s parents.  The subset products
    treat parents' follow events as independent, so the result is exact on
    in-forests (no two parents share an ancestor) and for linear ``f``; on
    other DAGs with non-linear ``f`` it is an approximation.
    """
    dag = _as_dag(dag)
    parents = dag.parent_map
    kmax = max((len(ps) for ps in parents.values()), default=0)
    if kmax > MAX_DELTA_ORDER:
        raise ValueError(f"a vertex has {kmax} parents; the subset expansion is limited to {MAX_DELTA_ORDER}")
    delta = delta_table(f, kmax).delta
    probs: dict[VertexId, float] = {}
    for v in linear_extension(dag).sequence:
        try:
            g = susceptibility[v]
        except KeyError:
            raise KeyError(f"no susceptibility for vertex {v!r}") from None
        e = elementary_symmetric([probs[u] for u in parents[v]])
        probs[v] = g * math.fsum(delta[k] * e[k] for k in range(len(e)))
    return FollowProbabilities({v: probs[v] for v in dag.vertices})


def expected_follows(probs: FollowProbabilities | Mapping[VertexId, float], targets) -> float:
    """Sum of the targets' follow probabilities."""
    table = probs.probs if isinstance(probs, FollowProbabilities) else probs
    total = []
    for t in targets:
        if t not in table:
            raise KeyError(f"no follow probability for target {t!r}")
        total.append(table[t])
    return math.fsum(total)
