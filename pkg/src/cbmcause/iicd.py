"""Improved iterative causal discovery: data in, partial ancestral graph out.

The search starts from a complete graph with circle marks. Iteration ``r``
tests every remaining edge ``x - y`` against conditioning sets of size ``r``
taken from both endpoints' sides, in order of how close their members sit to
``x`` and ``y`` along possible-d-sep paths. The first independence found
deletes the edge and records its separating set. After each iteration the
v-structures are re-read from the current skeleton, which shapes the
possible-d-sep paths of the next one. Once ``r`` passes its bound, the final
skeleton is oriented with v-structures and four propagation rules:

R1  ``a *-> b o-* c``, a and c non-adjacent                 =>  ``b --> c``
R2  ``a --> b *-> c`` or ``a *-> b --> c``, and ``a *-o c``   =>  ``a *-> c``
R3  ``a *-> b <-* c``, ``a *-o t o-* c``, a and c non-adjacent, ``t *-o b``
                                                            =>  ``t *-> b``
R4  discriminating path ``<t, ..., a, b, c>`` for b with ``b o-* c``:
    b in sepset(t, c)  =>  ``b --> c``;  otherwise  ``a <-> b <-> c``

Rules only ever replace circle marks.
"""

from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable

from .citest import CiDecision, FisherZTester
from .dataset import Dataset
from .graph import GraphKind, Mark, MixedGraph, NoSuchEdge, complete_circle_graph, pds_path_nodes


class RuleSet(str, enum.Enum):
    VSTRUCT_ONLY = "vstruct"
    STANDARD = "standard"


class OrientationConflict(Exception):
    def __init__(self, rule: str, triple: tuple, message: str = ""):
        self.rule = rule
        self.triple = triple
        super().__init__(f"{rule} on {triple}: {message or 'arrowhead demanded over a tail'}")


@dataclass(frozen=True)
class IicdConfig:
    alpha: float = 0.05
    max_r: int | None = None
    orientation_rule_set: RuleSet = RuleSet.STANDARD
    seed: int = 0
    ci_method: str = "pearson"
    refine_sepsets: bool = True
    vstruct_timing: str = "per_r"  # or "end"
    on_conflict: str = "raise"  # or "skip"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        object.__setattr__(self, "orientation_rule_set", RuleSet(self.orientation_rule_set))
        if self.vstruct_timing not in ("per_r", "end"):
            raise ValueError("vstruct_timing must be 'per_r' or 'end'")
        if self.on_conflict not in ("raise", "skip"):
            raise ValueError("on_conflict must be 'raise' or 'skip'")
        if self.max_r is not None and self.max_r < 0:
            raise ValueError("max_r must be non-negative")


class SepsetTable:
    """Symmetric map from an unordered node pair to its separating set."""

    def __init__(self):
        self._sets: dict[frozenset, frozenset] = {}

    def set(self, x: str, y: str, z: Iterable[str]) -> None:
        self._sets[frozenset((x, y))] = frozenset(z)

    def get(self, x: str, y: str) -> frozenset | None:
        return self._sets.get(frozenset((x, y)))

    def __contains__(self, pair) -> bool:
        return frozenset(pair) in self._sets

    def __len__(self):
        return len(self._sets)

    def items(self):
        return self._sets.items()

    def copy(self) -> "SepsetTable":
        t = SepsetTable()
        t._sets = dict(self._sets)
        return t

    def to_json(self, order: list[str] | None = None) -> list:
        key = (lambda v: order.index(v)) if order else (lambda v: v)
        rows = []
        for pair, z in self._sets.items():
            a, b = sorted(pair, key=key)
            rows.append([a, b, sorted(z, key=key)])
        rows.sort(key=lambda r: (key(r[0]), key(r[1])))
        return rows


@dataclass
class TraceEntry:
    r: int
    edge: tuple[str, str]
    cond: tuple[str, ...]
    action: str  # keep | remove | skip | refine
    decision: CiDecision | None = None

    def to_json(self) -> dict:
        doc = {"r": self.r, "edge": list(self.edge), "cond": list(self.cond), "action": self.action}
        if self.decision is not None:
            doc.update(self.decision.to_json())
        return doc


@dataclass
class DiscoveryTrace:
    entries: list[TraceEntry] = field(default_factory=list)
    skeletons: list[list[tuple[str, str]]] = field(default_factory=list)

    def removals(self) -> list[tuple[str, str]]:
        return [e.edge for e in self.entries if e.action == "remove"]

    def to_jsonl(self) -> str:
        head = {"format_version": 1, "n_entries": len(self.entries)}
        lines = [json.dumps(head)]
        lines.extend(json.dumps(e.to_json()) for e in self.entries)
        return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------------
# candidate conditioning sets
# ----------------------------------------------------------------------------


def _order_key(g: MixedGraph, z: frozenset):
    return tuple(sorted(g.position(v) for v in z))


def candidate_sets(g: MixedGraph, x: str, y: str, r: int) -> list[frozenset]:
    """Ordered size-``r`` conditioning sets for the edge ``x - y``.

    For ``r <= 1`` the sets are subsets of ``Adj(x) - {y}`` and
    ``Adj(y) - {x}``. For larger ``r`` they are drawn from the nodes reachable
    over possible-d-sep paths from either endpoint (avoiding the other one),
    which contain those neighbours. Each set ``Z`` is scored by the mean over
    its members of the shorter of the two path lengths, ascending; ties fall
    back to node order.
    """
    if not g.has_edge(x, y):
        raise NoSuchEdge(f"no edge {x!r}-{y!r}")
    if r < 0:
        raise ValueError("r must be non-negative")
    if r == 0:
        return [frozenset()]
    if r <= 1:
        pool_x = g.adjacent(x) - {y}
        pool_y = g.adjacent(y) - {x}
        dist = {v: 2 for v in pool_x | pool_y}
    else:
        from_x = pds_path_nodes(g, x, y)
        from_y = pds_path_nodes(g, y, x)
        pool_x = set(from_x)
        pool_y = set(from_y)
        dist = {}
        for v in pool_x | pool_y:
            dist[v] = min(from_x.get(v, float("inf")), from_y.get(v, float("inf")))
    cands = set()
    for pool in (pool_x, pool_y):
        ordered = sorted(pool, key=g.position)
        for combo in itertools.combinations(ordered, r):
            cands.add(frozenset(combo))
    scored = [(sum(dist[v] for v in z) / len(z), _order_key(g, z), z) for z in cands]
    scored.sort(key=lambda t: (t[0], t[1]))
    return [z for _, _, z in scored]


def candidate_scores(g: MixedGraph, x: str, y: str, r: int) -> list[tuple[frozenset, float]]:
    """Same as :func:`candidate_sets` but paired with each set's score."""
    sets = candidate_sets(g, x, y, r)
    if r == 0:
        return [(sets[0], 0.0)]
    if r <= 1:
        return [(z, 2.0) for z in sets]
    from_x = pds_path_nodes(g, x, y)
    from_y = pds_path_nodes(g, y, x)
    out = []
    for z in sets:
        d = sum(min(from_x.get(v, float("inf")), from_y.get(v, float("inf"))) for v in z) / len(z)
        out.append((z, d))
    return out


# ----------------------------------------------------------------------------
# skeleton
# ----------------------------------------------------------------------------


def _as_tester(data, cfg: IicdConfig):
    if isinstance(data, Dataset):
        return FisherZTester(data, cfg.alpha, cfg.ci_method)
    return data


def _refine(tester, x: str, y: str, z: frozenset, r: int, trace: list[TraceEntry], order) -> frozenset:
    # greedy deletion: drop members one at a time while independence survives
    current = list(sorted(z, key=order))
    for v in list(current):
        trial = [u for u in current if u != v]
        dec = tester.test(x, y, trial)
        if dec.independent:
            current = trial
            trace.append(TraceEntry(r, (x, y), tuple(trial), "refine", dec))
    return frozenset(current)


def skeleton_pass(g: MixedGraph, data, r: int, cfg: IicdConfig, sepsets: SepsetTable):
    """One sweep over the edges at conditioning size ``r``.

    All candidate sets come from a snapshot of ``g`` taken at the start of the
    sweep and removals are applied afterwards in edge order, so the outcome
    does not depend on the order edges are visited in.

    Returns the new graph, the updated sepset table and the trace entries.
    """
    tester = _as_tester(data, cfg)
    snap = g.copy()
    out = g.copy()
    sepsets = sepsets.copy()
    entries: list[TraceEntry] = []
    removals = []
    for x, y in snap.pairs():
        for z in candidate_sets(snap, x, y, r):
            cond = tuple(sorted(z, key=snap.position))
            if not tester.testable(len(z)):
                entries.append(TraceEntry(r, (x, y), cond, "skip"))
                continue
            dec = tester.test(x, y, cond)
            if dec.independent:
                entries.append(TraceEntry(r, (x, y), cond, "remove", dec))
                sep = z
                if cfg.refine_sepsets and z:
                    sep = _refine(tester, x, y, z, r, entries, snap.position)
                removals.append((x, y, sep))
                break
            entries.append(TraceEntry(r, (x, y), cond, "keep", dec))
    for x, y, sep in removals:
        out.remove_edge(x, y)
        sepsets.set(x, y, sep)
    return out, sepsets, entries


# ----------------------------------------------------------------------------
# orientation
# ----------------------------------------------------------------------------


def orient_v_structures(g: MixedGraph, sepsets: SepsetTable) -> MixedGraph:
    """Put arrowheads at ``z`` for every unshielded ``x - z - y`` with z outside sepset(x, y)."""
    out = g.copy()
    for z in g.nodes:
        nbrs = g.neighbors_sorted(z)
        for x, y in itertools.combinations(nbrs, 2):
            if g.has_edge(x, y):
                continue
            sep = sepsets.get(x, y)
            if sep is None or z in sep:
                continue
            out.set_mark(z, x, Mark.ARROW)
            out.set_mark(z, y, Mark.ARROW)
    return out


class _Orienter:
    def __init__(self, g: MixedGraph, sepsets: SepsetTable | None, on_conflict: str):
        self.g = g
        self.sepsets = sepsets
        self.on_conflict = on_conflict
        self.changed = False

    def put(self, node: str, other: str, mark: Mark, rule: str, triple: tuple) -> bool:
        cur = self.g.mark_at(node, other)
        if cur is mark:
            return True
        if cur is not Mark.CIRCLE:
            if self.on_conflict == "raise":
                raise OrientationConflict(rule, triple, f"mark at {node} is {cur.name}, wanted {mark.name}")
            return False
        self.g.set_mark(node, other, mark)
        self.changed = True
        return True

    def m(self, node, other):
        return self.g.mark_at(node, other)

    def r1(self):
        g = self.g
        for b in g.nodes:
            for a in g.neighbors_sorted(b):
                if self.m(b, a) is not Mark.ARROW:
                    continue
                for c in g.neighbors_sorted(b):
                    if c == a or g.has_edge(a, c):
                        continue
                    if self.m(b, c) is Mark.CIRCLE:
                        if self.put(c, b, Mark.ARROW, "R1", (a, b, c)):
                            self.put(b, c, Mark.TAIL, "R1", (a, b, c))

    def r2(self):
        g = self.g
        for a in g.nodes:
            for c in g.neighbors_sorted(a):
                if self.m(c, a) is not Mark.CIRCLE:
                    continue
                for b in g.neighbors_sorted(a):
                    if b == c or not g.has_edge(b, c):
                        continue
                    first = self.m(a, b) is Mark.TAIL and self.m(b, a) is Mark.ARROW and self.m(c, b) is Mark.ARROW
                    second = self.m(b, a) is Mark.ARROW and self.m(b, c) is Mark.TAIL and self.m(c, b) is Mark.ARROW
                    if first or second:
                        self.put(c, a, Mark.ARROW, "R2", (a, b, c))
                        break

    def r3(self):
        g = self.g
        for b in g.nodes:
            nb = g.neighbors_sorted(b)
            for a, c in itertools.combinations(nb, 2):
                if g.has_edge(a, c):
                    continue
                if self.m(b, a) is not Mark.ARROW or self.m(b, c) is not Mark.ARROW:
                    continue
                for t in nb:
                    if t in (a, c) or self.m(b, t) is not Mark.CIRCLE:
                        continue
                    if not (g.has_edge(t, a) and g.has_edge(t, c)):
                        continue
                    if self.m(t, a) is Mark.CIRCLE and self.m(t, c) is Mark.CIRCLE:
                        self.put(b, t, Mark.ARROW, "R3", (a, t, c, b))

    def _is_parent(self, u: str, c: str) -> bool:
        return self.g.has_edge(u, c) and self.m(u, c) is Mark.TAIL and self.m(c, u) is Mark.ARROW

    def r4(self):
        if self.sepsets is None:
            return
        g = self.g
        for c in g.nodes:
            for b in g.neighbors_sorted(c):
                if self.m(b, c) is not Mark.CIRCLE:
                    continue
                found = self._discriminating(b, c)
                if found is None:
                    continue
                t, a = found
                sep = self.sepsets.get(t, c)
                if sep is None:
                    continue
                if b in sep:
                    if self.put(c, b, Mark.ARROW, "R4", (t, a, b, c)):
                        self.put(b, c, Mark.TAIL, "R4", (t, a, b, c))
                else:
                    self.put(b, a, Mark.ARROW, "R4", (t, a, b, c))
                    self.put(b, c, Mark.ARROW, "R4", (t, a, b, c))
                    self.put(c, b, Mark.ARROW, "R4", (t, a, b, c))

    def _discriminating(self, b: str, c: str):
        """Shortest discriminating path ``<t, ..., a, b, c>`` for ``b``, as ``(t, a)``."""
        g = self.g
        # a: parent of c, adjacent to b with an arrowhead at a towards b
        starts = [
            a for a in g.neighbors_sorted(b)
            if a != c and self._is_parent(a, c) and self.m(a, b) is Mark.ARROW
        ]
        for a0 in starts:
            # each queue item: (current collider, visited)
            queue = [(a0, frozenset((b, c, a0)))]
            while queue:
                nxt = []
                for u, visited in queue:
                    for t in g.neighbors_sorted(u):
                        if t in visited or self.m(u, t) is not Mark.ARROW:
                            continue
                        if not g.has_edge(t, c):
                            return t, a0
                        if self._is_parent(t, c) and self.m(t, u) is Mark.ARROW:
                            nxt.append((t, visited | {t}))
                queue = nxt
        return None


def apply_orientation_rules(
    g: MixedGraph,
    cfg: IicdConfig | None = None,
    sepsets: SepsetTable | None = None,
) -> MixedGraph:
    """Run R1-R4 to a fixpoint (or nothing, under the v-structure-only rule set)."""
    cfg = cfg or IicdConfig()
    out = g.copy()
    out.kind = GraphKind.PAG
    if cfg.orientation_rule_set is RuleSet.VSTRUCT_ONLY:
        return out
    o = _Orienter(out, sepsets, cfg.on_conflict)
    while True:
        o.changed = False
        o.r1()
        o.r2()
        o.r3()
        o.r4()
        if not o.changed:
            return out


def orient(g: MixedGraph, sepsets: SepsetTable, cfg: IicdConfig) -> MixedGraph:
    """Fresh orientation of a skeleton: circles, v-structures, then the rules."""
    fresh = g.copy()
    fresh.reset_marks(Mark.CIRCLE)
    return apply_orientation_rules(orient_v_structures(fresh, sepsets), cfg, sepsets)


# ----------------------------------------------------------------------------
# driver
# ----------------------------------------------------------------------------


def iicd_discover(data, cfg: IicdConfig | None = None, nodes: list[str] | None = None):
    """Run the full search.

    Parameters
    ----------
    data : Dataset or tester
        A dataset (tested with Fisher z at ``cfg.alpha``) or any object with
        ``test(x, y, z) -> CiDecision``, ``testable(k)`` and ``names``.
    cfg : IicdConfig
    nodes : list of str, optional
        Restrict the search to these variables.

    Returns
    -------
    (MixedGraph, SepsetTable, DiscoveryTrace)
    """
    cfg = cfg or IicdConfig()
    tester = _as_tester(data, cfg)
    nodes = list(nodes) if nodes is not None else list(tester.names)
    d = len(nodes)
    g = complete_circle_graph(nodes)
    sepsets = SepsetTable()
    trace = DiscoveryTrace()
    bound = d - 2 if cfg.max_r is None else min(cfg.max_r, d - 2)
    r = 0
    while r <= bound:
        g, sepsets, entries = skeleton_pass(g, tester, r, cfg, sepsets)
        trace.entries.extend(entries)
        trace.skeletons.append(g.pairs())
        if cfg.vstruct_timing == "per_r":
            g.reset_marks(Mark.CIRCLE)
            g = orient_v_structures(g, sepsets)
        r += 1
    pag = orient(g, sepsets, cfg)
    return pag, sepsets, trace
