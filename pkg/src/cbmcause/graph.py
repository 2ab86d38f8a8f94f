"""Mixed graphs with tail / arrow / circle endpoint marks.

One class covers DAGs, MAGs, PAGs and bare skeletons. Each edge stores a mark
at both of its endpoints; ``g.mark_at(u, v)`` is the mark sitting at ``u`` on
the edge ``u - v``. So ``A --> B`` has ``mark_at("A", "B") is Mark.TAIL`` and
``mark_at("B", "A") is Mark.ARROW``.
"""

from __future__ import annotations

import enum
import itertools
import json
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

FORMAT_VERSION = 1


class Mark(enum.Enum):
    TAIL = "-"
    ARROW = ">"
    CIRCLE = "o"


class GraphKind(enum.Enum):
    DAG = "DAG"
    MAG = "MAG"
    PAG = "PAG"
    SKELETON = "Skeleton"


class GraphError(Exception):
    pass


class DuplicateNodeId(GraphError):
    pass


class UnknownNode(GraphError, KeyError):
    def __str__(self):
        return f"unknown node {self.args[0]!r}"


class NotADag(GraphError):
    pass


class NoSuchEdge(GraphError):
    pass


class ParseError(GraphError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


@dataclass(frozen=True)
class Edge:
    a: str
    b: str
    mark_a: Mark
    mark_b: Mark

    def __post_init__(self):
        if self.a == self.b:
            raise GraphError(f"self-loop on {self.a!r}")

    def reversed(self) -> "Edge":
        return Edge(self.b, self.a, self.mark_b, self.mark_a)

    @property
    def symbol(self) -> str:
        return _TOKEN_OF[(self.mark_a, self.mark_b)]


class MixedGraph:
    """Node list plus at most one marked edge per unordered node pair."""

    def __init__(self, nodes: Sequence[str], kind: GraphKind = GraphKind.PAG):
        nodes = list(nodes)
        if len(set(nodes)) != len(nodes):
            dup = sorted({x for x in nodes if nodes.count(x) > 1})
            raise DuplicateNodeId(f"duplicate node ids: {dup}")
        self._nodes = tuple(nodes)
        self._pos = {v: i for i, v in enumerate(nodes)}
        self._end: dict[str, dict[str, Mark]] = {v: {} for v in nodes}
        self.kind = GraphKind(kind)

    # -- basic access -------------------------------------------------------

    @property
    def nodes(self) -> tuple[str, ...]:
        return self._nodes

    def _check(self, *vs):
        for v in vs:
            if v not in self._pos:
                raise UnknownNode(v)

    def position(self, v: str) -> int:
        self._check(v)
        return self._pos[v]

    def has_edge(self, a: str, b: str) -> bool:
        self._check(a, b)
        return b in self._end[a]

    def add_edge(self, a: str, b: str, mark_a: Mark = Mark.CIRCLE, mark_b: Mark = Mark.CIRCLE) -> None:
        self._check(a, b)
        if a == b:
            raise GraphError(f"self-loop on {a!r}")
        if b in self._end[a]:
            raise GraphError(f"edge {a!r}-{b!r} already present")
        self._end[a][b] = Mark(mark_a)
        self._end[b][a] = Mark(mark_b)

    def remove_edge(self, a: str, b: str) -> None:
        if not self.has_edge(a, b):
            raise NoSuchEdge(f"no edge {a!r}-{b!r}")
        del self._end[a][b]
        del self._end[b][a]

    def mark_at(self, node: str, other: str) -> Mark:
        """Mark at ``node`` on the edge ``node - other``."""
        if not self.has_edge(node, other):
            raise NoSuchEdge(f"no edge {node!r}-{other!r}")
        return self._end[node][other]

    def set_mark(self, node: str, other: str, mark: Mark) -> None:
        if not self.has_edge(node, other):
            raise NoSuchEdge(f"no edge {node!r}-{other!r}")
        self._end[node][other] = Mark(mark)

    def adjacent(self, v: str) -> set[str]:
        self._check(v)
        return set(self._end[v])

    def neighbors_sorted(self, v: str) -> list[str]:
        return sorted(self.adjacent(v), key=self._pos.__getitem__)

    def edge(self, a: str, b: str) -> Edge:
        return Edge(a, b, self.mark_at(a, b), self.mark_at(b, a))

    def edges(self) -> list[Edge]:
        """Edges with ``a`` before ``b`` in node order, sorted by that order."""
        out = []
        for a in self._nodes:
            for b in self.neighbors_sorted(a):
                if self._pos[a] < self._pos[b]:
                    out.append(self.edge(a, b))
        return out

    def pairs(self) -> list[tuple[str, str]]:
        return [(e.a, e.b) for e in self.edges()]

    def skeleton(self) -> set[frozenset]:
        return {frozenset((e.a, e.b)) for e in self.edges()}

    def n_edges(self) -> int:
        return sum(len(v) for v in self._end.values()) // 2

    def copy(self) -> "MixedGraph":
        g = MixedGraph(self._nodes, self.kind)
        g._end = {v: dict(m) for v, m in self._end.items()}
        return g

    def reset_marks(self, mark: Mark = Mark.CIRCLE) -> None:
        for v in self._end:
            for w in self._end[v]:
                self._end[v][w] = mark

    # -- directed structure -------------------------------------------------

    def is_directed_edge(self, a: str, b: str) -> bool:
        """True for ``a --> b``."""
        return (
            self.has_edge(a, b)
            and self._end[a][b] is Mark.TAIL
            and self._end[b][a] is Mark.ARROW
        )

    def parents(self, v: str) -> set[str]:
        self._check(v)
        return {u for u in self._end[v] if self.is_directed_edge(u, v)}

    def children(self, v: str) -> set[str]:
        self._check(v)
        return {w for w in self._end[v] if self.is_directed_edge(v, w)}

    def ancestors(self, vs: Iterable[str]) -> set[str]:
        """Nodes with a directed path into any of ``vs`` (``vs`` included)."""
        seen = set()
        stack = list(vs)
        self._check(*stack)
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            stack.extend(self.parents(v))
        return seen

    def descendants(self, v: str) -> set[str]:
        seen = set()
        stack = [v]
        while stack:
            u = stack.pop()
            if u in seen:
                continue
            seen.add(u)
            stack.extend(self.children(u))
        return seen

    def topological_order(self) -> list[str]:
        """Kahn's algorithm over directed edges, ties broken by node order."""
        indeg = {v: len(self.parents(v)) for v in self._nodes}
        ready = [v for v in self._nodes if indeg[v] == 0]
        order = []
        while ready:
            ready.sort(key=self._pos.__getitem__)
            v = ready.pop(0)
            order.append(v)
            for w in self.children(v):
                indeg[w] -= 1
                if indeg[w] == 0:
                    ready.append(w)
        if len(order) != len(self._nodes):
            raise NotADag("directed cycle present")
        return order

    def validate(self) -> None:
        if self.kind is GraphKind.DAG:
            for e in self.edges():
                if {e.mark_a, e.mark_b} != {Mark.TAIL, Mark.ARROW}:
                    raise NotADag(f"edge {e.a}{e.symbol}{e.b} is not directed")
            self.topological_order()

    def subgraph(self, keep: Iterable[str]) -> "MixedGraph":
        keep = set(keep)
        self._check(*keep)
        g = MixedGraph([v for v in self._nodes if v in keep], self.kind)
        for e in self.edges():
            if e.a in keep and e.b in keep:
                g.add_edge(e.a, e.b, e.mark_a, e.mark_b)
        return g

    # -- comparison / serialisation ---------------------------------------

    def __eq__(self, other):
        if not isinstance(other, MixedGraph):
            return NotImplemented
        return self._nodes == other._nodes and self.kind == other.kind and self._end == other._end

    def __repr__(self):
        return f"MixedGraph(kind={self.kind.value}, nodes={len(self._nodes)}, edges={self.n_edges()})"

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": self.kind.value,
            "nodes": list(self._nodes),
            "edges": [[e.a, e.mark_a.value, e.mark_b.value, e.b] for e in self.edges()],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "MixedGraph":
        g = cls(doc["nodes"], GraphKind(doc["kind"]))
        for a, ma, mb, b in doc["edges"]:
            g.add_edge(a, b, Mark(ma), Mark(mb))
        return g

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def dag_from_parents(parents: dict[str, Sequence[str]], nodes: Sequence[str] | None = None) -> MixedGraph:
    """Build a DAG from ``{child: [parent, ...]}``."""
    if nodes is None:
        nodes = list(parents)
    g = MixedGraph(nodes, GraphKind.DAG)
    for child in nodes:
        for p in parents.get(child, ()):
            if g.has_edge(p, child):
                raise NotADag(f"{p!r} and {child!r} are each other's parents")
            g.add_edge(p, child, Mark.TAIL, Mark.ARROW)
    g.validate()
    return g


def complete_circle_graph(nodes: Sequence[str]) -> MixedGraph:
    g = MixedGraph(nodes, GraphKind.PAG)
    if not g.nodes:
        raise GraphError("need at least one node")
    for a, b in itertools.combinations(g.nodes, 2):
        g.add_edge(a, b, Mark.CIRCLE, Mark.CIRCLE)
    return g


def adjacent(g: MixedGraph, x: str) -> set[str]:
    return g.adjacent(x)


# ----------------------------------------------------------------------------
# d-separation
# ----------------------------------------------------------------------------


def d_separated(dag: MixedGraph, x: str, y: str, z: Iterable[str] = ()) -> bool:
    """Decide ``x _||_ y | z`` in a DAG.

    Uses the moral graph of the ancestral set of ``{x, y} | z``: ``x`` and
    ``y`` are d-separated iff ``z`` cuts every path between them there.
    """
    z = set(z)
    if dag.kind is not GraphKind.DAG:
        raise NotADag(f"graph kind is {dag.kind.value}")
    dag._check(x, y, *z)
    if x == y:
        raise GraphError("x and y must differ")
    if x in z or y in z:
        raise GraphError("x and y must not be in the conditioning set")
    dag.validate()

    anc = dag.ancestors({x, y} | z)
    moral: dict[str, set[str]] = {v: set() for v in anc}
    for v in anc:
        pa = [p for p in dag.parents(v) if p in anc]
        for p in pa:
            moral[v].add(p)
            moral[p].add(v)
        for p, q in itertools.combinations(pa, 2):
            moral[p].add(q)
            moral[q].add(p)

    seen = {x}
    queue = deque([x])
    while queue:
        v = queue.popleft()
        for w in moral[v]:
            if w == y:
                return False
            if w in z or w in seen:
                continue
            seen.add(w)
            queue.append(w)
    return True


# ----------------------------------------------------------------------------
# possible-d-sep paths
# ----------------------------------------------------------------------------


def is_collider_on(g: MixedGraph, u: str, v: str, w: str) -> bool:
    """Both marks at ``v`` (towards ``u`` and towards ``w``) are arrowheads."""
    return g.mark_at(v, u) is Mark.ARROW and g.mark_at(v, w) is Mark.ARROW


def _pds_triple_ok(g: MixedGraph, u: str, v: str, w: str) -> bool:
    return is_collider_on(g, u, v, w) or g.has_edge(u, w)


def pds_path_nodes(g: MixedGraph, x: str, y: str) -> dict[str, int]:
    """Shortest possible-d-sep path from ``x`` to every reachable node.

    A path ``<x, ..., z>`` qualifies when ``y`` is not on it and every interior
    node is a collider on the path or closes a triangle with its two path
    neighbours. Lengths count the nodes on the path, so a neighbour of ``x``
    is at length 2. Circle marks never count as arrowheads.

    The search expands simple paths in order of length and drops a partial
    path when another one ending on the same last edge visited a subset of
    its nodes. Such a path can be extended wherever the dropped one could,
    so the returned lengths are exact.
    """
    g._check(x, y)
    if x == y:
        raise GraphError("x and y must differ")
    best: dict[str, int] = {}
    targets = len(g.nodes) - 2
    # frontier entries: (previous, current, visited)
    frontier = []
    for v in g.neighbors_sorted(x):
        if v == y:
            continue
        best[v] = 2
        frontier.append((x, v, frozenset((x, v))))
    kept: dict[tuple[str, str], list[frozenset]] = {}
    length = 2
    while frontier and len(best) < targets:
        length += 1
        nxt = []
        for u, v, visited in frontier:
            for w in g.neighbors_sorted(v):
                if w == y or w in visited:
                    continue
                if not _pds_triple_ok(g, u, v, w):
                    continue
                seen = visited | {w}
                key = (v, w)
                bucket = kept.setdefault(key, [])
                if any(s <= seen for s in bucket):
                    continue
                bucket.append(seen)
                if w not in best:
                    best[w] = length
                nxt.append((v, w, seen))
        frontier = nxt
    return best


# ----------------------------------------------------------------------------
# latent projection
# ----------------------------------------------------------------------------


def latent_projection(dag: MixedGraph, observed: Sequence[str]) -> MixedGraph:
    """Maximal ancestral graph over ``observed`` implied by ``dag``.

    Two observed nodes are adjacent iff no subset of the other observed nodes
    d-separates them. The mark at ``b`` is a tail when ``b`` is an ancestor of
    ``a`` and an arrowhead otherwise. Exhaustive over subsets; meant for the
    small graphs used as ground truth.
    """
    observed = [v for v in dag.nodes if v in set(observed)]
    mag = MixedGraph(observed, GraphKind.MAG)
    for a, b in itertools.combinations(observed, 2):
        rest = [v for v in observed if v not in (a, b)]
        separable = False
        for k in range(len(rest) + 1):
            for s in itertools.combinations(rest, k):
                if d_separated(dag, a, b, s):
                    separable = True
                    break
            if separable:
                break
        if separable:
            continue
        anc_a = dag.ancestors([a])
        anc_b = dag.ancestors([b])
        mark_b = Mark.TAIL if b in anc_a else Mark.ARROW
        mark_a = Mark.TAIL if a in anc_b else Mark.ARROW
        mag.add_edge(a, b, mark_a, mark_b)
    return mag


# ----------------------------------------------------------------------------
# edge-list text format
# ----------------------------------------------------------------------------

_TOKEN_OF = {
    (Mark.TAIL, Mark.ARROW): "-->",
    (Mark.TAIL, Mark.TAIL): "---",
    (Mark.ARROW, Mark.ARROW): "<->",
    (Mark.CIRCLE, Mark.TAIL): "o--",
    (Mark.CIRCLE, Mark.ARROW): "o->",
    (Mark.CIRCLE, Mark.CIRCLE): "o-o",
    # mirrored spellings, written out by flipping the edge
    (Mark.ARROW, Mark.TAIL): "<--",
    (Mark.TAIL, Mark.CIRCLE): "--o",
    (Mark.ARROW, Mark.CIRCLE): "<-o",
}
_MARKS_OF = {tok: marks for marks, tok in _TOKEN_OF.items()}
_CANONICAL = {"-->", "---", "<->", "o--", "o->", "o-o"}


def _canonical(e: Edge) -> Edge:
    if _TOKEN_OF[(e.mark_a, e.mark_b)] in _CANONICAL:
        return e
    return e.reversed()


def edge_notation(g: MixedGraph) -> str:
    """One edge per line using ``-->``, ``---``, ``<->``, ``o--``, ``o->``, ``o-o``.

    Header comments carry the format version, graph kind and full node list so
    isolated nodes survive a round trip.
    """
    lines = [
        f"# format_version: {FORMAT_VERSION}",
        f"# kind: {g.kind.value}",
        "# nodes: " + " ".join(g.nodes),
    ]
    for e in g.edges():
        e = _canonical(e)
        lines.append(f"{e.a} {e.symbol} {e.b}")
    return "\n".join(lines) + "\n"


def parse_notation(text: str) -> MixedGraph:
    kind = GraphKind.PAG
    nodes: list[str] | None = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            key, _, val = body.partition(":")
            key = key.strip().lower()
            if key == "kind":
                try:
                    kind = GraphKind(val.strip())
                except ValueError:
                    raise ParseError(lineno, f"unknown graph kind {val.strip()!r}") from None
            elif key == "nodes":
                nodes = val.split()
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(lineno, f"expected 'A <token> B', got {line!r}")
        a, tok, b = parts
        if tok not in _MARKS_OF:
            raise ParseError(lineno, f"unknown edge token {tok!r}")
        if a == b:
            raise ParseError(lineno, "self-loop")
        edges.append((lineno, a, b, *_MARKS_OF[tok]))
    if nodes is None:
        nodes = []
        for _, a, b, _, _ in edges:
            for v in (a, b):
                if v not in nodes:
                    nodes.append(v)
    try:
        g = MixedGraph(nodes, kind)
    except DuplicateNodeId as exc:
        raise ParseError(0, str(exc)) from None
    for lineno, a, b, ma, mb in edges:
        if a not in g._pos or b not in g._pos:
            raise ParseError(lineno, "edge references a node missing from the node list")
        if g.has_edge(a, b):
            raise ParseError(lineno, f"duplicate edge {a}-{b}")
        g.add_edge(a, b, ma, mb)
    return g
