"""Dependency graphs over ordered sentences and their subgraph algebra.

A sentence of n words is represented as a node-labeled directed graph whose
nodes are the word positions 1..n in surface order.  Two graph flavours are
built on top of a plain dependency tree:

  * the bigram graph adds a link between every pair of adjacent words, and
  * the sibling graph adds a link between consecutive children of a head.

Translation units are node-induced subgraphs: a set of positions together
with every edge of the parent graph whose endpoints both fall in the set.
The module also provides the subsequence algebra used by rule extraction
and decoding (joins of disjoint position sets, placement of a collapsed
non-terminal, connected-subsequence enumeration).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Optional, Sequence, Union

DEPENDENCY = "dependency"
SEQUENTIAL = "sequential"
BOTH = "both"

EDGE_LABELS = (DEPENDENCY, SEQUENTIAL, BOTH)


class GraphError(ValueError):
    """Structural violation in a graph or subsequence operation."""


class MalformedTreeError(GraphError):
    """Input expected to be a dependency tree is not one."""


def _merge_labels(a: str, b: str) -> str:
    if a == b:
        return a
    return BOTH


class DepGraph:
    """Directed, weakly connected graph over the words of one sentence.

    Positions are 1-based.  Edges are ordered (head, dependent) pairs, each
    carrying a relation label: "dependency", "sequential", or "both" when a
    sequential link coincides with a dependency link.
    """

    __slots__ = ("words", "tags", "edges", "_neighbors")

    def __init__(
        self,
        tokens: Sequence[tuple[str, str]],
        edges: Iterable[tuple],
    ) -> None:
        self.words: tuple[str, ...] = tuple(w for w, _ in tokens)
        self.tags: tuple[str, ...] = tuple(t for _, t in tokens)
        n = len(self.words)
        merged: dict[tuple[int, int], str] = {}
        for item in edges:
            if len(item) == 2:
                (h, d), label = item, DEPENDENCY
            else:
                h, d, label = item
            if not (1 <= h <= n and 1 <= d <= n):
                raise GraphError(f"edge ({h},{d}) out of range 1..{n}")
            if h == d:
                raise GraphError(f"self-loop at position {h}")
            if label not in EDGE_LABELS:
                raise GraphError(f"unknown edge label {label!r}")
            key = (h, d)
            if key in merged:
                merged[key] = _merge_labels(merged[key], label)
            else:
                merged[key] = label
        self.edges: dict[tuple[int, int], str] = dict(sorted(merged.items()))
        neighbors: list[set[int]] = [set() for _ in range(n + 1)]
        for h, d in self.edges:
            neighbors[h].add(d)
            neighbors[d].add(h)
        self._neighbors = tuple(frozenset(s) for s in neighbors)
        if n > 1 and not self._is_weakly_connected():
            raise GraphError("graph is not weakly connected")

    @property
    def n(self) -> int:
        return len(self.words)

    def word(self, pos: int) -> str:
        return self.words[pos - 1]

    def tag(self, pos: int) -> str:
        return self.tags[pos - 1]

    def tokens(self) -> tuple[tuple[str, str], ...]:
        return tuple(zip(self.words, self.tags))

    def neighbors(self, pos: int) -> frozenset[int]:
        """Positions adjacent to `pos`, ignoring edge direction."""
        return self._neighbors[pos]

    def dependency_head(self, pos: int) -> Optional[int]:
        """Head of `pos` via a dependency-labeled edge, None for the root."""
        for (h, d), label in self.edges.items():
            if d == pos and label != SEQUENTIAL:
                return h
        return None

    def _is_weakly_connected(self) -> bool:
        seen = {1}
        stack = [1]
        while stack:
            u = stack.pop()
            for v in self._neighbors[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.n

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DepGraph):
            return NotImplemented
        return (
            self.words == other.words
            and self.tags == other.tags
            and self.edges == other.edges
        )

    def __hash__(self) -> int:
        return hash((self.words, self.tags, tuple(self.edges.items())))

    def __repr__(self) -> str:
        return f"DepGraph({len(self.words)} words, {len(self.edges)} edges)"


def _check_tree(g: DepGraph) -> None:
    """Raise unless g is a single-rooted, acyclic dependency tree."""
    head: dict[int, int] = {}
    for (h, d), label in g.edges.items():
        if label != DEPENDENCY:
            raise MalformedTreeError(f"non-dependency edge ({h},{d}):{label}")
        if d in head:
            raise MalformedTreeError(f"position {d} has two heads")
        head[d] = h
    roots = [p for p in range(1, g.n + 1) if p not in head]
    if len(roots) != 1:
        raise MalformedTreeError(f"expected one root, found {len(roots)}")
    # Cycle/connectivity check: walk down from the root.
    children: dict[int, list[int]] = {}
    for d, h in head.items():
        children.setdefault(h, []).append(d)
    seen = set()
    stack = [roots[0]]
    while stack:
        u = stack.pop()
        if u in seen:
            raise MalformedTreeError("cycle detected")
        seen.add(u)
        stack.extend(children.get(u, ()))
    if len(seen) != g.n:
        raise MalformedTreeError("tree is disconnected")


def build_dbg(tree: DepGraph) -> DepGraph:
    """Add a sequential link between every pair of adjacent words.

    Links run from the later word to the earlier one; a link that coincides
    with a dependency edge is stored once with label "both".
    """
    _check_tree(tree)
    edges: list[tuple[int, int, str]] = [
        (h, d, DEPENDENCY) for (h, d) in tree.edges
    ]
    edges.extend((i + 1, i, SEQUENTIAL) for i in range(1, tree.n))
    return DepGraph(tree.tokens(), edges)


def build_dsg(tree: DepGraph) -> DepGraph:
    """Add a sequential link between consecutive children of each head.

    Children are ordered by position and linked pairwise right-to-left, so
    a chain-shaped tree gains no links at all.
    """
    _check_tree(tree)
    children: dict[int, list[int]] = {}
    for (h, d) in tree.edges:
        children.setdefault(h, []).append(d)
    edges: list[tuple[int, int, str]] = [
        (h, d, DEPENDENCY) for (h, d) in tree.edges
    ]
    for kids in children.values():
        kids.sort()
        for left, right in zip(kids, kids[1:]):
            edges.append((right, left, SEQUENTIAL))
    return DepGraph(tree.tokens(), edges)


@dataclass(frozen=True, order=True)
class Subsequence:
    """A strictly increasing selection of source positions.

    The selection decomposes into maximal continuous runs; a single run
    means the subsequence is an ordinary continuous phrase.
    """

    positions: tuple[int, ...]

    def __post_init__(self) -> None:
        for a, b in zip(self.positions, self.positions[1:]):
            if b <= a:
                raise GraphError(f"positions not strictly increasing: {self.positions}")

    @classmethod
    def of(cls, positions: Iterable[int]) -> "Subsequence":
        return cls(tuple(sorted(set(positions))))

    @cached_property
    def runs(self) -> tuple[tuple[int, int], ...]:
        """Maximal continuous intervals [begin, end] covering the positions."""
        runs: list[tuple[int, int]] = []
        for p in self.positions:
            if runs and p == runs[-1][1] + 1:
                runs[-1] = (runs[-1][0], p)
            else:
                runs.append((p, p))
        return tuple(runs)

    @cached_property
    def _pos_set(self) -> frozenset[int]:
        return frozenset(self.positions)

    @property
    def begin(self) -> int:
        if not self.positions:
            raise GraphError("empty subsequence has no begin")
        return self.positions[0]

    @property
    def end(self) -> int:
        if not self.positions:
            raise GraphError("empty subsequence has no end")
        return self.positions[-1]

    @property
    def span(self) -> int:
        return self.end - self.begin + 1 if self.positions else 0

    @property
    def is_continuous(self) -> bool:
        return len(self.runs) <= 1

    def gap_total(self) -> int:
        """Summed length of the gaps between consecutive runs."""
        return sum(
            b2 - e1 - 1 for (_, e1), (b2, _) in zip(self.runs, self.runs[1:])
        )

    def overlaps(self, other: "Subsequence") -> bool:
        return not self._pos_set.isdisjoint(other._pos_set)

    def issubset(self, other: "Subsequence") -> bool:
        return self._pos_set <= other._pos_set

    def difference(self, other: "Subsequence") -> "Subsequence":
        return Subsequence.of(self._pos_set - other._pos_set)

    def __contains__(self, pos: int) -> bool:
        return pos in self._pos_set

    def __len__(self) -> int:
        return len(self.positions)

    def __iter__(self) -> Iterator[int]:
        return iter(self.positions)

    def __repr__(self) -> str:
        return "{" + ",".join(map(str, self.positions)) + "}"


def join(a: Subsequence, b: Subsequence) -> Subsequence:
    """Order-preserving union of two disjoint subsequences."""
    if a.overlaps(b):
        raise GraphError(f"join of overlapping subsequences {a} and {b}")
    return Subsequence(tuple(sorted(a.positions + b.positions)))


def nt_position(sub: Subsequence) -> int:
    """Position a collapsed non-terminal occupies: the start of its cover."""
    if not sub.positions:
        raise GraphError("empty subsequence has no position")
    return sub.positions[0]


@dataclass(frozen=True)
class Terminal:
    word: str
    tag: str = ""

    def token(self) -> str:
        return self.word


@dataclass(frozen=True)
class NonTerminal:
    symbol: str
    index: int

    def token(self) -> str:
        return f"[{self.symbol},{self.index}]"


FragNode = Union[Terminal, NonTerminal]


@dataclass(frozen=True)
class GraphFragment:
    """Pattern side of a translation rule: ordered nodes plus local edges.

    Nodes are terminals (words) or linked non-terminals; edges are ordered
    (head, dependent) pairs over local node indices, optionally labeled.
    `cover` records, per node, the original source positions the node spans;
    it is carried while extracting or matching and excluded from equality.
    """

    nodes: tuple[FragNode, ...]
    edges: tuple[tuple[int, int, Optional[str]], ...]
    cover: Optional[tuple[Subsequence, ...]] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.cover is not None and len(self.cover) != len(self.nodes):
            raise GraphError("cover length does not match node count")
        seen: set[int] = set()
        for node in self.nodes:
            if isinstance(node, NonTerminal):
                if node.index in seen:
                    raise GraphError(f"duplicate non-terminal index {node.index}")
                seen.add(node.index)

    @property
    def terminals(self) -> tuple[tuple[int, Terminal], ...]:
        return tuple(
            (i, nd) for i, nd in enumerate(self.nodes) if isinstance(nd, Terminal)
        )

    @property
    def nonterminals(self) -> tuple[tuple[int, NonTerminal], ...]:
        return tuple(
            (i, nd) for i, nd in enumerate(self.nodes) if isinstance(nd, NonTerminal)
        )

    def pattern(self) -> "GraphFragment":
        """Copy without position bookkeeping (for storage in rule tables)."""
        if self.cover is None:
            return self
        return GraphFragment(self.nodes, self.edges)

    def covered(self) -> Subsequence:
        if self.cover is None:
            raise GraphError("fragment carries no position cover")
        merged: list[int] = []
        for sub in self.cover:
            merged.extend(sub.positions)
        return Subsequence(tuple(sorted(merged)))

    def is_connected(self) -> bool:
        if len(self.nodes) <= 1:
            return True
        adj: dict[int, set[int]] = {i: set() for i in range(len(self.nodes))}
        for h, d, _ in self.edges:
            adj[h].add(d)
            adj[d].add(h)
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == len(self.nodes)


def induced_subgraph(g: DepGraph, sub: Subsequence) -> Optional[GraphFragment]:
    """Node-induced subgraph of g over `sub`, or None when it is disconnected.

    The fragment keeps exactly the edges of g with both endpoints in `sub`,
    re-numbered to local indices in position order.
    """
    for p in sub:
        if not (1 <= p <= g.n):
            raise GraphError(f"position {p} out of range 1..{g.n}")
    local = {p: i for i, p in enumerate(sub.positions)}
    nodes = tuple(Terminal(g.word(p), g.tag(p)) for p in sub.positions)
    edges = tuple(
        sorted(
            (local[h], local[d], label)
            for (h, d), label in g.edges.items()
            if h in local and d in local
        )
    )
    frag = GraphFragment(
        nodes, edges, cover=tuple(Subsequence((p,)) for p in sub.positions)
    )
    if not frag.is_connected():
        return None
    return frag


def induced_edge_count(g: DepGraph, sub: Subsequence) -> int:
    local = sub._pos_set
    return sum(1 for (h, d) in g.edges if h in local and d in local)


def collapse(
    frag: GraphFragment, sub: Subsequence, symbol: str, index: int
) -> GraphFragment:
    """Replace the terminal nodes covering `sub` with one non-terminal node.

    The new node sits at the start position of `sub` in the node order.
    Edges between a surviving node and any collapsed node are redirected to
    the non-terminal (duplicates merged, direction kept); edges internal to
    `sub` are dropped.  Requires the collapsed region to be connected.
    """
    if frag.cover is None:
        raise GraphError("collapse requires a position-covered fragment")
    sub_nodes: list[int] = []
    for i, node in enumerate(frag.nodes):
        node_cover = frag.cover[i]
        if node_cover.issubset(sub):
            sub_nodes.append(i)
        elif node_cover.overlaps(sub):
            raise GraphError(f"subsequence {sub} splits node {i}")
    found = set()
    for i in sub_nodes:
        if isinstance(frag.nodes[i], NonTerminal):
            raise GraphError("cannot collapse an already collapsed node")
        found.update(frag.cover[i].positions)
    if found != set(sub.positions):
        raise GraphError(f"{sub} is not contained in the fragment")
    sub_set = set(sub_nodes)
    # The collapsed region must itself be a connected induced piece.
    if len(sub_nodes) > 1:
        adj: dict[int, set[int]] = {i: set() for i in sub_nodes}
        for h, d, _ in frag.edges:
            if h in sub_set and d in sub_set:
                adj[h].add(d)
                adj[d].add(h)
        seen = {sub_nodes[0]}
        stack = [sub_nodes[0]]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if len(seen) != len(sub_nodes):
            raise GraphError(f"collapsed region {sub} is not connected")

    nt_pos = nt_position(sub)
    keep = [i for i in range(len(frag.nodes)) if i not in sub_set]
    entries: list[tuple[int, FragNode, Subsequence]] = [
        (frag.cover[i].begin, frag.nodes[i], frag.cover[i]) for i in keep
    ]
    entries.append((nt_pos, NonTerminal(symbol, index), sub))
    entries.sort(key=lambda e: e[0])
    order_of_start = {start: new_i for new_i, (start, _, _) in enumerate(entries)}
    new_index = {i: order_of_start[frag.cover[i].begin] for i in keep}
    nt_local = order_of_start[nt_pos]

    merged: dict[tuple[int, int], Optional[str]] = {}
    for h, d, label in frag.edges:
        if h in sub_set and d in sub_set:
            continue
        nh = nt_local if h in sub_set else new_index[h]
        nd = nt_local if d in sub_set else new_index[d]
        key = (nh, nd)
        if key in merged:
            prev = merged[key]
            if prev is not None and label is not None:
                merged[key] = _merge_labels(prev, label)
            elif prev is None:
                merged[key] = None
        else:
            merged[key] = label
    return GraphFragment(
        nodes=tuple(node for _, node, _ in entries),
        edges=tuple(sorted((h, d, l) for (h, d), l in merged.items())),
        cover=tuple(cv for _, _, cv in entries),
    )


def canonical_key(frag: GraphFragment, use_edge_labels: bool = False) -> str:
    """Deterministic serialization used for rule lookup and matching.

    Node tokens in order, a separator bar, then edges as "h-d" local index
    pairs in lexicographic order; ":label" suffixes appear when labels are
    switched on.  Two fragments match in place iff their keys are equal.
    """
    parts = [node.token() for node in frag.nodes]
    parts.append("|")
    for h, d, label in sorted(frag.edges, key=lambda e: (e[0], e[1])):
        if use_edge_labels:
            parts.append(f"{h}-{d}:{label or ''}")
        else:
            parts.append(f"{h}-{d}")
    return " ".join(parts)


def enumerate_connected_subsequences(
    g: DepGraph, max_size: int, max_span: Optional[int] = None
) -> set[Subsequence]:
    """All subsequences with a connected induced subgraph, within limits.

    Incremental expansion with an exclusion set; each connected node subset
    is generated exactly once, so no post-hoc dedup is needed.  `max_span`
    bounds end - begin + 1 of the subsequence.
    """
    if max_size < 1:
        raise GraphError("max_size must be at least 1")
    out: set[Subsequence] = set()

    def span_of(nodes: frozenset[int]) -> int:
        return max(nodes) - min(nodes) + 1

    def extend(current: frozenset[int], frontier: set[int], root: int) -> None:
        out.add(Subsequence(tuple(sorted(current))))
        if len(current) == max_size:
            return
        frontier = set(frontier)
        while frontier:
            w = frontier.pop()
            grown = current | {w}
            if max_span is not None and span_of(grown) > max_span:
                continue
            new_frontier = set(frontier)
            for u in g.neighbors(w):
                if u > root and u not in grown and u not in frontier:
                    ok = all(u not in g.neighbors(v) for v in current)
                    if ok:
                        new_frontier.add(u)
            extend(grown, new_frontier, root)

    for v in range(1, g.n + 1):
        extend(frozenset([v]), {u for u in g.neighbors(v) if u > v}, v)
    return out
