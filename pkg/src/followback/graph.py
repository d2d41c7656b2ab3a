"""Directed social graph, file ingestion, and DAG utilities.

Edge convention, used everywhere in this package: the pair ``(u, v)`` means
"u is followed by v".  Content posted by ``u`` is visible to ``v``, ``u`` is
one of ``v``'s *friends*, and ``v`` is one of ``u``'s *followers*.  Reading a
file with the opposite convention silently swaps friends and followers, so
every loader and writer documents it.
"""
from __future__ import annotations

import csv
import heapq
import json
import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from types import MappingProxyType
from typing import Hashable, Iterable, Iterator, Mapping, Sequence, Union

import numpy as np

VertexId = Hashable
Edge = tuple[VertexId, VertexId]


class GraphError(Exception):
    """Base class for graph ingestion and validation problems."""


class GraphParseError(GraphError):
    """A graph file could not be parsed."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.line = line
        self.path = path


class GraphValidationError(GraphError):
    """A graph violates a structural invariant (self-loop, duplicate, dangling edge)."""


class CyclicGraphError(GraphError):
    """An operation that needs a DAG received a graph with a directed cycle."""

    def __init__(self, cycle: Sequence[VertexId]):
        super().__init__(f"graph contains a directed cycle: {list(cycle)}")
        self.cycle = list(cycle)


def id_key(v: VertexId) -> tuple:
    """Sort key giving a stable total order over mixed int/str vertex ids."""
    if isinstance(v, bool):
        return (2, str(v))
    if isinstance(v, (int, np.integer)):
        return (0, int(v), "")
    return (1, 0, str(v))


@dataclass(frozen=True)
class VertexMeta:
    """Platform-wide counts for a vertex.

    ``friend_count`` is the number of accounts the user follows and
    ``follower_count`` the number following it.  Both are global counts, not
    degrees inside the (usually much smaller) crawled graph.
    """

    friend_count: int
    follower_count: int
    is_target: bool = False

    def __post_init__(self) -> None:
        if self.friend_count < 0 or self.follower_count < 0:
            raise GraphValidationError(
                f"counts must be non-negative, got {self.friend_count}, {self.follower_count}"
            )


class SocialGraph:
    """Immutable directed graph with per-vertex metadata.

    Vertices keep the insertion order they were given in; :meth:`index`
    exposes that order, which the simulator uses to key random streams.
    """

    def __init__(
        self,
        vertices: Mapping[VertexId, VertexMeta],
        edges: Iterable[Edge],
        defaulted: Iterable[VertexId] = (),
    ) -> None:
        self._meta: dict[VertexId, VertexMeta] = dict(vertices)
        self._index = {v: i for i, v in enumerate(self._meta)}
        parents: dict[VertexId, set] = {v: set() for v in self._meta}
        children: dict[VertexId, set] = {v: set() for v in self._meta}
        edge_list: list[Edge] = []
        for e in edges:
            u, v = e
            if u == v:
                raise GraphValidationError(f"self-loop on vertex {u!r}")
            for end in (u, v):
                if end not in self._meta:
                    raise GraphValidationError(f"edge ({u!r}, {v!r}) references unknown vertex {end!r}")
            if v in children[u]:
                raise GraphValidationError(f"duplicate edge ({u!r}, {v!r})")
            children[u].add(v)
            parents[v].add(u)
            edge_list.append((u, v))
        self._edges = tuple(edge_list)
        self._edge_set = frozenset(edge_list)
        self._parents = {v: frozenset(s) for v, s in parents.items()}
        self._children = {v: frozenset(s) for v, s in children.items()}
        self.defaulted = frozenset(defaulted)

    # -- queries -------------------------------------------------------------

    @property
    def vertices(self) -> Mapping[VertexId, VertexMeta]:
        return MappingProxyType(self._meta)

    @property
    def edges(self) -> tuple[Edge, ...]:
        return self._edges

    @property
    def edge_set(self) -> frozenset[Edge]:
        return self._edge_set

    @cached_property
    def targets(self) -> frozenset:
        return frozenset(v for v, m in self._meta.items() if m.is_target)

    def meta(self, v: VertexId) -> VertexMeta:
        self._check(v)
        return self._meta[v]

    def index(self, v: VertexId) -> int:
        self._check(v)
        return self._index[v]

    def parents(self, v: VertexId) -> frozenset:
        """Friends of ``v``: every ``u`` with an edge ``(u, v)``."""
        self._check(v)
        return self._parents[v]

    def children(self, v: VertexId) -> frozenset:
        """Followers of ``v``: every ``w`` with an edge ``(v, w)``."""
        self._check(v)
        return self._children[v]

    def has_edge(self, u: VertexId, v: VertexId) -> bool:
        return (u, v) in self._edge_set

    def _check(self, v: VertexId) -> None:
        if v not in self._meta:
            raise KeyError(f"unknown vertex {v!r}")

    def __contains__(self, v: object) -> bool:
        return v in self._meta

    def __len__(self) -> int:
        return len(self._meta)

    def __iter__(self) -> Iterator[VertexId]:
        return iter(self._meta)

    def __repr__(self) -> str:
        return f"SocialGraph(|V|={len(self)}, |E|={len(self._edges)}, |T|={len(self.targets)})"

    # -- derived graphs ------------------------------------------------------

    def subgraph(self, keep: Iterable[VertexId]) -> SocialGraph:
        keep = set(keep)
        for v in keep:
            self._check(v)
        meta = {v: m for v, m in self._meta.items() if v in keep}
        edges = [(u, v) for u, v in self._edges if u in keep and v in keep]
        return SocialGraph(meta, edges, self.defaulted & keep)

    def with_targets(self, targets: Iterable[VertexId]) -> SocialGraph:
        """Copy of the graph whose target flags are exactly ``targets``."""
        targets = set(targets)
        for t in targets:
            self._check(t)
        meta = {
            v: VertexMeta(m.friend_count, m.follower_count, v in targets) for v, m in self._meta.items()
        }
        return SocialGraph(meta, self._edges, self.defaulted)

    def to_json(self) -> dict:
        return {
            "vertices": [
                {
                    "id": v,
                    "friend_count": m.friend_count,
                    "follower_count": m.follower_count,
                    "is_target": m.is_target,
                }
                for v, m in self._meta.items()
            ],
            "edges": [[u, v] for u, v in self._edges],
        }


# ---------------------------------------------------------------------------
# Loading and saving
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LoadReport:
    path: str
    format: str
    n_vertices: int
    n_edges: int
    n_targets: int
    defaulted: tuple = ()

    def summary(self) -> str:
        lines = [
            f"graph: {self.path} ({self.format})",
            f"vertices: {self.n_vertices}",
            f"edges: {self.n_edges}",
            f"targets: {self.n_targets}",
        ]
        if self.defaulted:
            shown = ", ".join(str(v) for v in self.defaulted[:10])
            more = f" (+{len(self.defaulted) - 10} more)" if len(self.defaulted) > 10 else ""
            lines.append(
                f"warning: {len(self.defaulted)} vertices lack metadata; "
                f"counts defaulted to graph in/out degree: {shown}{more}"
            )
        return "\n".join(lines)


def _parse_bool(raw: object, where: str, path: str, line: int | None) -> bool:
    if isinstance(raw, bool):
        return raw
    text = str(raw).strip().lower()
    if text in ("1", "true", "t", "yes", "y"):
        return True
    if text in ("0", "false", "f", "no", "n", ""):
        return False
    raise GraphParseError(f"bad boolean {raw!r} for {where}", line, path)


def _parse_count(raw: object, where: str, path: str, line: int | None) -> int:
    try:
        value = float(raw) if not isinstance(raw, int) else raw
    except (TypeError, ValueError):
        raise GraphParseError(f"bad count {raw!r} for {where}", line, path) from None
    if isinstance(value, float):
        if not math.isfinite(value) or value != int(value):
            raise GraphParseError(f"bad count {raw!r} for {where}", line, path)
        value = int(value)
    if value < 0:
        raise GraphValidationError(f"negative count {raw!r} for {where}")
    return value


def _assemble(
    partial: dict[VertexId, dict], edges: list[Edge], path: str, fmt: str
) -> tuple[SocialGraph, LoadReport]:
    indeg: dict[VertexId, int] = {v: 0 for v in partial}
    outdeg: dict[VertexId, int] = {v: 0 for v in partial}
    for u, v in edges:
        if u in outdeg:
            outdeg[u] += 1
        if v in indeg:
            indeg[v] += 1
    meta = {}
    defaulted = []
    for v, rec in partial.items():
        friends = rec.get("friend_count")
        followers = rec.get("follower_count")
        if friends is None or followers is None:
            defaulted.append(v)
        meta[v] = VertexMeta(
            friends if friends is not None else indeg[v],
            followers if followers is not None else outdeg[v],
            bool(rec.get("is_target", False)),
        )
    graph = SocialGraph(meta, edges, defaulted)
    report = LoadReport(path, fmt, len(graph), len(graph.edges), len(graph.targets), tuple(defaulted))
    return graph, report


def _load_json(path: Path) -> tuple[SocialGraph, LoadReport]:
    p = str(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise GraphParseError(exc.msg, exc.lineno, p) from None
    if not isinstance(doc, dict) or "vertices" not in doc or "edges" not in doc:
        raise GraphParseError("expected an object with 'vertices' and 'edges'", None, p)
    partial: dict[VertexId, dict] = {}
    for i, rec in enumerate(doc["vertices"]):
        if not isinstance(rec, dict) or "id" not in rec:
            raise GraphParseError(f"vertex record #{i} has no 'id'", None, p)
        v = rec["id"]
        if isinstance(v, list):
            raise GraphParseError(f"vertex record #{i} has a non-scalar id", None, p)
        if v in partial:
            raise GraphValidationError(f"duplicate vertex id {v!r}")
        where = f"vertex {v!r}"
        partial[v] = {
            "friend_count": None if rec.get("friend_count") is None else _parse_count(rec["friend_count"], where, p, None),
            "follower_count": None
            if rec.get("follower_count") is None
            else _parse_count(rec["follower_count"], where, p, None),
            "is_target": _parse_bool(rec.get("is_target", False), where, p, None),
        }
    edges = []
    for i, rec in enumerate(doc["edges"]):
        if not isinstance(rec, (list, tuple)) or len(rec) != 2:
            raise GraphParseError(f"edge record #{i} is not a [src, dst] pair", None, p)
        edges.append((rec[0], rec[1]))
    return _assemble(partial, edges, p, "json")


def _read_csv_rows(path: Path, header: Sequence[str]) -> Iterator[tuple[int, list[str]]]:
    p = str(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise GraphParseError("empty file", 1, p) from None
        got = [c.strip() for c in first]
        if got[: len(header)] != list(header):
            raise GraphParseError(f"expected header {','.join(header)!r}, got {','.join(first)!r}", 1, p)
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            yield reader.line_num, [c.strip() for c in row]


def _load_csv(path: Path, metadata: Path | None) -> tuple[SocialGraph, LoadReport]:
    partial: dict[VertexId, dict] = {}
    if metadata is not None:
        mp = str(metadata)
        for line, row in _read_csv_rows(metadata, ("id", "friend_count", "follower_count")):
            if len(row) not in (3, 4):
                raise GraphParseError(f"expected 3 or 4 columns, got {len(row)}", line, mp)
            v = row[0]
            if v in partial:
                raise GraphValidationError(f"duplicate vertex id {v!r} in {mp}")
            partial[v] = {
                "friend_count": _parse_count(row[1], f"vertex {v!r}", mp, line),
                "follower_count": _parse_count(row[2], f"vertex {v!r}", mp, line),
                "is_target": _parse_bool(row[3], f"vertex {v!r}", mp, line) if len(row) == 4 else False,
            }
    edges = []
    for line, row in _read_csv_rows(path, ("src", "dst")):
        if len(row) != 2 or not row[0] or not row[1]:
            raise GraphParseError(f"expected 'src,dst', got {','.join(row)!r}", line, str(path))
        u, v = row
        edges.append((u, v))
        for end in (u, v):
            partial.setdefault(end, {})
    return _assemble(partial, edges, str(path), "csv")


def load_graph(
    path: str | Path, fmt: str | None = None, metadata: str | Path | None = None
) -> tuple[SocialGraph, LoadReport]:
    """Read a graph file and validate it.

    ``fmt`` is ``"json"`` or ``"csv"`` and defaults from the file suffix.  CSV
    edge lists have header ``src,dst`` and may come with a sidecar metadata
    CSV (``id,friend_count,follower_count,is_target``).  Edge ``(src, dst)``
    means *dst follows src*.  Vertices without counts fall back to their
    graph in/out degree and are listed in the returned :class:`LoadReport`.
    """
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() in (".csv", ".tsv", ".txt") else "json"
    if fmt == "json":
        return _load_json(path)
    if fmt == "csv":
        return _load_csv(path, Path(metadata) if metadata is not None else None)
    raise ValueError(f"unknown graph format {fmt!r}")


def save_graph(graph: SocialGraph, path: str | Path) -> None:
    """Write ``graph`` in the JSON schema read by :func:`load_graph`."""
    Path(path).write_text(json.dumps(graph.to_json(), indent=1) + "\n")


# ---------------------------------------------------------------------------
# DAG utilities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InducedDag:
    """The edges a policy respects, over the vertices the policy visits."""

    vertices: tuple
    kept_edges: frozenset

    @classmethod
    def from_graph(cls, graph: SocialGraph) -> InducedDag:
        """View an acyclic graph as a DAG; raises if it has a cycle."""
        cycle = find_cycle(graph.edges)
        if cycle is not None:
            raise CyclicGraphError(cycle)
        return cls(tuple(graph.vertices), frozenset(graph.edges))

    @cached_property
    def parent_map(self) -> Mapping[VertexId, tuple]:
        out: dict[VertexId, list] = {v: [] for v in self.vertices}
        for u, v in self.kept_edges:
            out[v].append(u)
        return {v: tuple(sorted(ps, key=id_key)) for v, ps in out.items()}

    def parents(self, v: VertexId) -> tuple:
        try:
            return self.parent_map[v]
        except KeyError:
            raise KeyError(f"unknown vertex {v!r}") from None

    def topological_order(self) -> list:
        return list(linear_extension(self).sequence)


DagLike = Union[InducedDag, SocialGraph]


def _vertices_and_edges(obj) -> tuple[list, list[Edge]]:
    if isinstance(obj, SocialGraph):
        return list(obj.vertices), list(obj.edges)
    if isinstance(obj, InducedDag):
        return list(obj.vertices), sorted(obj.kept_edges, key=lambda e: (id_key(e[0]), id_key(e[1])))
    edges = [tuple(e) for e in obj]
    seen: dict = {}
    for u, v in edges:
        seen.setdefault(u, None)
        seen.setdefault(v, None)
    return list(seen), edges


def find_cycle(edges: Iterable[Edge] | SocialGraph) -> list | None:
    """Return a shortest directed cycle as a vertex list, or ``None``.

    Vertices that Kahn's algorithm can peel off are never on a cycle; for each
    remaining edge ``(u, v)`` a breadth-first search finds the shortest path
    back from ``v`` to ``u``.  The cycle ``[u, v, ..., w]`` closes with the
    edge ``(w, u)``.
    """
    if isinstance(edges, SocialGraph):
        edges = edges.edges
    edge_list = list(edges)
    succ: dict = {}
    indeg: dict = {}
    for u, v in edge_list:
        succ.setdefault(u, []).append(v)
        succ.setdefault(v, [])
        indeg[v] = indeg.get(v, 0) + 1
        indeg.setdefault(u, 0)
    queue = deque(v for v, d in indeg.items() if d == 0)
    while queue:
        u = queue.popleft()
        for w in succ[u]:
            indeg[w] -= 1
            if indeg[w] == 0:
                queue.append(w)
    core = {v for v, d in indeg.items() if d > 0}
    if not core:
        return None
    core_succ = {u: [w for w in succ[u] if w in core] for u in core}
    best: list | None = None
    for u, v in edge_list:
        if u not in core or v not in core:
            continue
        # BFS v -> u inside the cyclic core
        prev = {v: None}
        queue = deque([v])
        found = False
        while queue and not found:
            a = queue.popleft()
            for b in core_succ[a]:
                if b not in prev:
                    prev[b] = a
                    if b == u:
                        found = True
                        break
                    queue.append(b)
        if not found:
            continue
        path = [u]
        while path[-1] != v:
            path.append(prev[path[-1]])
        path.reverse()  # v ... u
        cycle = [u] + path[:-1]
        if best is None or len(cycle) < len(best):
            best = cycle
            if len(best) == 2:
                break
    return best


def is_acyclic(obj: DagLike | Iterable[Edge]) -> bool:
    _, edges = _vertices_and_edges(obj)
    return find_cycle(edges) is None


def linear_extension(dag: DagLike) -> "Policy":
    """A topological order of every vertex, smallest id first among ties."""
    vertices, edges = _vertices_and_edges(dag)
    return _kahn(vertices, edges, key=id_key)


def _kahn(vertices: Sequence, edges: Iterable[Edge], key) -> "Policy":
    succ: dict = {v: [] for v in vertices}
    indeg: dict = {v: 0 for v in vertices}
    for u, v in edges:
        if u not in succ or v not in succ:
            raise KeyError(f"edge ({u!r}, {v!r}) references a vertex outside the DAG")
        succ[u].append(v)
        indeg[v] += 1
    heap = [(key(v), i, v) for i, v in enumerate(vertices) if indeg[v] == 0]
    heapq.heapify(heap)
    order = []
    pos = {v: i for i, v in enumerate(vertices)}
    while heap:
        _, _, u = heapq.heappop(heap)
        order.append(u)
        for w in succ[u]:
            indeg[w] -= 1
            if indeg[w] == 0:
                heapq.heappush(heap, (key(w), pos[w], w))
    if len(order) != len(vertices):
        cycle = find_cycle(edges) or []
        raise CyclicGraphError(cycle)
    return Policy(tuple(order))


@dataclass(frozen=True)
class Policy:
    """Ordered sequence of distinct vertices the agent interacts with."""

    sequence: tuple
    provenance: str = ""
    seed: int | None = None

    def __post_init__(self) -> None:
        seq = tuple(self.sequence)
        object.__setattr__(self, "sequence", seq)
        if len(set(seq)) != len(seq):
            dup = next(v for i, v in enumerate(seq) if v in seq[:i])
            raise ValueError(f"policy repeats vertex {dup!r}")

    def __len__(self) -> int:
        return len(self.sequence)

    def __iter__(self) -> Iterator:
        return iter(self.sequence)

    def validate(self, graph: SocialGraph) -> None:
        for v in self.sequence:
            if v not in graph:
                raise KeyError(f"policy vertex {v!r} is not in the graph")

    def to_json(self) -> dict:
        return {"sequence": list(self.sequence), "provenance": self.provenance, "seed": self.seed}

    @classmethod
    def from_json(cls, doc: Mapping) -> Policy:
        return cls(tuple(doc["sequence"]), doc.get("provenance", ""), doc.get("seed"))


def induced_dag(graph: SocialGraph, policy: Policy | Sequence[VertexId]) -> InducedDag:
    """Keep the edges ``(u, v)`` with ``u`` visited before ``v``.

    Edges touching vertices the policy never visits are dropped.
    """
    if not isinstance(policy, Policy):
        policy = Policy(tuple(policy))
    policy.validate(graph)
    pos = {v: i for i, v in enumerate(policy.sequence)}
    kept = frozenset((u, v) for u, v in graph.edges if u in pos and v in pos and pos[u] < pos[v])
    return InducedDag(policy.sequence, kept)


def overlap(graph: SocialGraph, v: VertexId, followed: Iterable[VertexId]) -> int:
    """Number of ``v``'s friends that already follow the agent."""
    parents = graph.parents(v)
    if not isinstance(followed, (set, frozenset)):
        followed = set(followed)
    return len(parents & followed)


def enumerate_paths(dag: InducedDag | SocialGraph, v: VertexId, max_len: int) -> list[list[tuple]]:
    """All directed paths ending at ``v``, grouped by length (edge count).

    ``result[l]`` lists vertex tuples ``(w_0, ..., w_l = v)``; ``result[0]`` is
    ``[(v,)]``.  The input must be acyclic.
    """
    if isinstance(dag, SocialGraph):
        dag = InducedDag.from_graph(dag)
    parents = dag.parent_map
    if v not in parents:
        raise KeyError(f"unknown vertex {v!r}")
    out: list[list[tuple]] = [[] for _ in range(max_len + 1)]
    stack: list[tuple] = [(v,)]
    while stack:
        path = stack.pop()
        length = len(path) - 1
        out[length].append(path)
        if length < max_len:
            for u in parents[path[0]]:
                stack.append((u,) + path)
    for paths in out:
        paths.sort(key=lambda p: tuple(id_key(x) for x in p))
    return out


# ---------------------------------------------------------------------------
# Synthetic graphs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CountDistribution:
    """Log-uniform ranges for friend and follower counts.

    Targets draw from the ``target_*`` ranges, everyone else from the plain
    ranges.  The defaults mimic celebrity targets (hundreds of friends, up to
    tens of millions of followers) surrounded by ordinary accounts.
    """

    friends: tuple[int, int] = (20, 5_000)
    followers: tuple[int, int] = (20, 200_000)
    target_friends: tuple[int, int] = (40, 500)
    target_followers: tuple[int, int] = (900, 66_000_000)

    def draw(self, rng: np.random.Generator, n: int, target: bool) -> tuple[np.ndarray, np.ndarray]:
        fr = self.target_friends if target else self.friends
        fo = self.target_followers if target else self.followers
        return _log_uniform(rng, fr, n), _log_uniform(rng, fo, n)


def _log_uniform(rng: np.random.Generator, bounds: tuple[int, int], n: int) -> np.ndarray:
    lo, hi = bounds
    if lo < 0 or hi < lo:
        raise ValueError(f"bad count range {bounds}")
    a, b = math.log(lo + 1), math.log(hi + 1)
    return np.floor(np.exp(rng.uniform(a, b, size=n)) - 1).astype(np.int64).clip(lo, hi)


SYNTH_KINDS = ("random-dag", "erdos-renyi-directed", "two-hop")


def synth_graph(
    kind: str,
    n: int,
    edge_prob: float = 0.0,
    target_count: int = 1,
    count_distribution: CountDistribution | None = None,
    seed: int = 0,
    edge_count: int | None = None,
    one_hop_fraction: float = 0.35,
) -> SocialGraph:
    """Generate a reproducible synthetic social graph.

    ``random-dag`` draws a random vertex order and only emits edges that point
    forward along it.  ``erdos-renyi-directed`` includes each ordered pair
    independently.  Passing ``edge_count`` instead samples exactly that many
    edges uniformly from the admissible pairs.

    ``two-hop`` mirrors a crawl around a target set: ``target_count`` targets,
    a layer of their friends (each is a friend of at least one target), and a
    layer of friends-of-friends (each is a friend of at least one first-layer
    vertex).  ``edge_prob`` then adds uniform background edges on top.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError("edge_prob must lie in [0, 1]")
    if not 0 <= target_count <= n:
        raise ValueError("target_count must lie in [0, n]")
    if kind not in SYNTH_KINDS:
        raise ValueError(f"unknown graph kind {kind!r}; expected one of {SYNTH_KINDS}")
    dist = count_distribution or CountDistribution()
    rng = np.random.default_rng(seed)
    ids = [f"v{i}" for i in range(n)]

    if kind == "two-hop":
        return _two_hop(rng, ids, edge_prob, target_count, dist, one_hop_fraction)

    targets = set(rng.choice(n, size=target_count, replace=False).tolist()) if target_count else set()
    if kind == "random-dag":
        order = rng.permutation(n)
        rank = np.empty(n, dtype=np.int64)
        rank[order] = np.arange(n)
        allowed = rank[:, None] < rank[None, :]
    else:
        allowed = ~np.eye(n, dtype=bool)
    if edge_count is not None:
        cand = np.flatnonzero(allowed.ravel())
        if not 0 <= edge_count <= cand.size:
            raise ValueError(f"edge_count must lie in [0, {cand.size}]")
        pick = np.sort(rng.choice(cand.size, size=edge_count, replace=False))
        flat = cand[pick]
    else:
        flat = np.flatnonzero((allowed & (rng.random((n, n)) < edge_prob)).ravel())
    src, dst = np.divmod(flat, n)
    edges = [(ids[a], ids[b]) for a, b in zip(src.tolist(), dst.tolist())]
    meta = _draw_meta(rng, ids, targets, dist)
    return SocialGraph(meta, edges)


def _draw_meta(rng, ids: list[str], targets: set[int], dist: CountDistribution) -> dict:
    n = len(ids)
    fr, fo = dist.draw(rng, n, target=False)
    tfr, tfo = dist.draw(rng, n, target=True)
    return {
        ids[i]: VertexMeta(
            int(tfr[i] if i in targets else fr[i]),
            int(tfo[i] if i in targets else fo[i]),
            i in targets,
        )
        for i in range(n)
    }


def _two_hop(rng, ids, edge_prob, target_count, dist, one_hop_fraction) -> SocialGraph:
    n = len(ids)
    t = max(target_count, 1)
    rest = n - t
    n1 = rest if rest <= 1 else max(1, int(round(rest * one_hop_fraction)))
    targets = list(range(t))
    layer1 = list(range(t, t + n1))
    layer2 = list(range(t + n1, n))
    adj = np.zeros((n, n), dtype=bool)
    for u in layer1:
        adj[u, rng.choice(targets)] = True
        # a second target with small probability, so some friends are shared
        if t > 1 and rng.random() < 0.2:
            adj[u, rng.choice(targets)] = True
    for u in layer2:
        for _ in range(1 + int(rng.random() < 0.3)):
            adj[u, rng.choice(layer1)] = True
    adj |= rng.random((n, n)) < edge_prob
    np.fill_diagonal(adj, False)
    src, dst = np.nonzero(adj)
    edges = [(ids[a], ids[b]) for a, b in zip(src.tolist(), dst.tolist())]
    meta = _draw_meta(rng, ids, set(targets[:target_count]), dist)
    return SocialGraph(meta, edges)
