import itertools
import math

import numpy as np
import pytest

from followback import SocialGraph, VertexMeta

_CRITERIA: list[tuple[str, str, str]] = []


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    props = dict(report.user_properties)
    if "criterion" in props:
        outcome = "PASS" if report.passed else "FAIL"
        _CRITERIA.append((props["criterion"], outcome, props.get("detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, detail in sorted(_CRITERIA, key=lambda r: int(r[0].split()[0])):
        line = f"criterion {name}: {outcome}"
        terminalreporter.write_line(f"{line}  [{detail}]" if detail else line)


def make_graph(n_or_ids, edges, targets=(), counts=None):
    ids = list(range(n_or_ids)) if isinstance(n_or_ids, int) else list(n_or_ids)
    counts = counts or {}
    meta = {v: VertexMeta(*counts.get(v, (100, 100)), v in set(targets)) for v in ids}
    return SocialGraph(meta, edges)


def random_dag_edges(rng, n, p, max_in=None):
    """Edges i -> j (i < j) of a random DAG on 0..n-1, then relabelled."""
    perm = rng.permutation(n)
    edges = []
    for j in range(n):
        cand = [i for i in range(j) if rng.random() < p]
        if max_in is not None and len(cand) > max_in:
            cand = sorted(rng.choice(cand, size=max_in, replace=False).tolist())
        edges += [(int(perm[i]), int(perm[j])) for i in cand]
    return edges


def enumerate_outcomes(order, parents, prob):
    """Exact follow marginals by brute force over all 2^n outcome vectors.

    ``prob(v, phi)`` is the follow probability of ``v`` at overlap ``phi``.
    Independent of the package's bitmask implementation.
    """
    pos = {v: i for i, v in enumerate(order)}
    marg = {v: [] for v in order}
    for bits in itertools.product((0, 1), repeat=len(order)):
        w = 1.0
        for i, v in enumerate(order):
            phi = sum(bits[pos[u]] for u in parents.get(v, ()) if u in pos and pos[u] < i)
            p = prob(v, phi)
            w *= p if bits[i] else 1.0 - p
        for i, v in enumerate(order):
            if bits[i]:
                marg[v].append(w)
    return {v: math.fsum(ws) for v, ws in marg.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
