"""Monte Carlo and exact evaluation of interaction policies.

Random numbers come from numpy's Philox4x64 counter-based generator keyed by
the seed.  The uniform used for replication ``r`` and graph vertex ``i`` sits
at a fixed counter position (``r * blocks + i // 4``, 4 doubles per block), so
any chunk of replications can be regenerated independently and results do
not depend on how replications are batched.  Using the graph's vertex index,
not the policy position, means two policies that visit the same vertex in the
same replication draw the same uniform for it (common random numbers).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import expit

from .graph import Policy, SocialGraph, VertexId
from .model import LogisticCoefficients, ProductModel, DEFAULT_COEFFICIENTS

EXACT_GUARD = 20
_CHUNK_DRAWS = 1 << 22


class GuardError(ValueError):
    """Instance too large for exhaustive enumeration."""


@dataclass(frozen=True)
class SimulationReport:
    replications: int
    expected_target_follows: float
    standard_error: float
    per_target_frequency: Mapping[VertexId, float]
    seed: int
    policy_id: str = ""
    policy_length: int = 0

    def to_json(self) -> dict:
        return {
            "policy_id": self.policy_id,
            "policy_length": self.policy_length,
            "replications": self.replications,
            "mean": self.expected_target_follows,
            "standard_error": self.standard_error,
            "seed": self.seed,
            "per_target_frequency": {str(k): v for k, v in self.per_target_frequency.items()},
        }


def _uniform_block(key: tuple[int, int], n_vertices: int, start: int, count: int) -> np.ndarray:
    blocks = (n_vertices + 3) // 4
    bitgen = np.random.Philox(key=np.array(key, dtype=np.uint64))
    bitgen.advance(start * blocks)
    return np.random.Generator(bitgen).random((count, 4 * blocks))[:, :n_vertices]


def _prepare(graph: SocialGraph, policy: Policy):
    policy.validate(graph)
    pos = {v: i for i, v in enumerate(policy.sequence)}
    parent_pos = [
        np.array(sorted(pos[u] for u in graph.parents(v) if u in pos and pos[u] < pos[v]), dtype=np.int64)
        for v in policy.sequence
    ]
    return parent_pos


def simulate_policy(
    graph: SocialGraph,
    policy: Policy | Sequence[VertexId],
    coeffs: LogisticCoefficients = DEFAULT_COEFFICIENTS,
    replications: int = 10_000,
    seed: int = 0,
    targets: Iterable[VertexId] | None = None,
    stream: int = 0,
    policy_id: str = "",
) -> SimulationReport:
    """Replay the policy ``replications`` times under the logistic model.

    Each visited vertex follows with the logistic probability at its current
    overlap, the count of its friends that already follow the agent.  The
    report holds the mean number of targets following at the end, its
    standard error, and each target's follow frequency.
    """
    if replications < 1:
        raise ValueError("replications must be at least 1")
    if not isinstance(policy, Policy):
        policy = Policy(tuple(policy))
    targets = set(graph.targets if targets is None else targets)
    parent_pos = _prepare(graph, policy)
    seq = policy.sequence
    L = len(seq)
    n = len(graph)
    base = np.array(
        [coeffs.base_score(graph.meta(v).friend_count, graph.meta(v).follower_count) for v in seq]
    )
    col = np.array([graph.index(v) for v in seq], dtype=np.int64)
    tpos = [i for i, v in enumerate(seq) if v in targets]
    hits = np.zeros(L, dtype=np.int64)
    total = 0
    total_sq = 0
    chunk = max(1, _CHUNK_DRAWS // max(n, 1))
    key = (int(seed), int(stream))
    for start in range(0, replications, chunk):
        count = min(chunk, replications - start)
        if L == 0:
            continue
        u = _uniform_block(key, n, start, count)[:, col]
        followed = np.zeros((count, L), dtype=bool)
        for i in range(L):
            pp = parent_pos[i]
            phi = followed[:, pp].sum(axis=1) if pp.size else 0
            prob = expit(base[i] + coeffs.beta_overlap * phi)
            followed[:, i] = u[:, i] < prob
        hits += followed.sum(axis=0)
        per_rep = followed[:, tpos].sum(axis=1).astype(np.int64)
        total += int(per_rep.sum())
        total_sq += int((per_rep * per_rep).sum())
    mean = total / replications
    if replications > 1:
        var = (total_sq - total * total / replications) / (replications - 1)
        se = math.sqrt(max(var, 0.0) / replications)
    else:
        se = 0.0
    freq = {v: int(hits[i]) / replications for i, v in enumerate(seq) if v in targets}
    for t in sorted(targets - set(seq), key=str):
        freq[t] = 0.0
    return SimulationReport(replications, mean, se, freq, int(seed), policy_id or policy.provenance, L)


@dataclass(frozen=True)
class ExactValue:
    expected_follows: float
    probabilities: Mapping[VertexId, float] = field(default_factory=dict)


def exact_policy_value(
    graph: SocialGraph,
    policy: Policy | Sequence[VertexId],
    model: LogisticCoefficients | ProductModel = DEFAULT_COEFFICIENTS,
    targets: Iterable[VertexId] | None = None,
) -> ExactValue:
    """Exact expected target follows by enumerating every follow outcome.

    Outcomes are built up along the policy with the chain rule, so each
    vertex's follow probability depends on exactly which earlier friends
    followed.  ``model`` is either logistic coefficients or a product model
    (probabilities capped at one).  Limited to policies of at most 20 vertices.
    """
    if not isinstance(policy, Policy):
        policy = Policy(tuple(policy))
    if len(policy) > EXACT_GUARD:
        raise GuardError(f"exact enumeration is limited to {EXACT_GUARD} vertices, got {len(policy)}")
    targets = set(graph.targets if targets is None else targets)
    parent_pos = _prepare(graph, policy)
    seq = policy.sequence
    masks = np.zeros(1, dtype=np.int64)
    weights = np.ones(1)
    marginals = {}
    for i, v in enumerate(seq):
        pmask = 0
        for j in parent_pos[i]:
            pmask |= 1 << int(j)
        phi = np.bitwise_count(masks & pmask).astype(np.float64) if pmask else np.zeros(masks.size)
        meta = graph.meta(v)
        if isinstance(model, LogisticCoefficients):
            p = expit(model.base_score(meta.friend_count, meta.follower_count) + model.beta_overlap * phi)
        elif model.overlap_response is None:
            p = np.minimum(model.g(v) * (1.0 + model.beta * phi), 1.0)
        else:
            f = np.array([model.f(int(k)) for k in range(len(parent_pos[i]) + 1)])
            p = np.minimum(model.g(v) * f[phi.astype(np.int64)], 1.0)
        marginals[v] = float(np.dot(weights, p))
        masks = np.concatenate([masks, masks | (1 << i)])
        weights = np.concatenate([weights * (1.0 - p), weights * p])
    value = math.fsum(marginals[v] for v in seq if v in targets)
    return ExactValue(value, marginals)


def compare_policies(
    graph: SocialGraph,
    policies: Mapping[str, Policy] | Sequence[Policy],
    coeffs: LogisticCoefficients = DEFAULT_COEFFICIENTS,
    replications: int = 10_000,
    seed: int = 0,
    common_random_numbers: bool = True,
    targets: Iterable[VertexId] | None = None,
) -> list[SimulationReport]:
    """Simulate several policies on the same graph.

    With common random numbers every policy reads the same Philox stream;
    otherwise policy ``k`` reads its own stream ``k + 1``.
    """
    if not isinstance(policies, Mapping):
        policies = {p.provenance or f"policy{k}": p for k, p in enumerate(policies)}
    reports = []
    for k, (name, policy) in enumerate(policies.items()):
        stream = 0 if common_random_numbers else k + 1
        reports.append(
            simulate_policy(graph, policy, coeffs, replications, seed, targets, stream=stream, policy_id=name)
        )
    return reports


REPORT_COLUMNS = ("policy_id", "policy_length", "replications", "mean", "standard_error", "seed")


def write_reports_csv(reports: Sequence[SimulationReport], path: str | Path, per_target: str | Path | None = None) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for r in reports:
            w.writerow([r.policy_id, r.policy_length, r.replications, repr(r.expected_target_follows), repr(r.standard_error), r.seed])
    if per_target is not None:
        with Path(per_target).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("policy_id", "target", "frequency"))
            for r in reports:
                for t, f in r.per_target_frequency.items():
                    w.writerow([r.policy_id, t, repr(f)])
