"""Lazy k-best extraction over the derivation hypergraph.

Decoders leave behind nodes whose incoming edges record a rule application,
its additive cost, and the antecedent nodes.  Because recombination merges
only items with identical scoring state, an edge's cost stays valid for
every alternative derivation of its tails, so the usual lazy best-first
expansion applies: keep per-node candidate heaps, and materialize the jth
best of a tail only when a successor asks for it.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable, Optional

from .model import Step, add_features


@dataclass
class DerivEdge:
    """One way to build a node from its tails."""

    tails: tuple["DerivNode", ...]
    delta: float
    features: dict[str, float]
    build: Callable[[tuple[tuple[str, ...], ...]], tuple[str, ...]]
    rule: object = None
    covered: object = None


@dataclass
class DerivNode:
    incoming: list[DerivEdge] = field(default_factory=list)
    # lazily filled by KBest
    _derivs: list["_Ranked"] = field(default_factory=list)
    _cand: list = field(default_factory=list)
    _pushed: set = field(default_factory=set)
    _started: bool = False


@dataclass
class _Ranked:
    score: float
    edge: DerivEdge
    ranks: tuple[int, ...]


@dataclass
class Packed:
    """A fully assembled derivation."""

    score: float
    words: tuple[str, ...]
    features: dict[str, float]
    applications: tuple
    trees: tuple = ()

    def signature_multiset(self):
        return frozenset(_count(self.applications))


def _count(items):
    seen: dict = {}
    for it in items:
        seen[it] = seen.get(it, 0) + 1
    return seen.items()


class KBest:
    """Lazy enumeration of complete derivations of a goal node."""

    def __init__(self, goal: DerivNode):
        self.goal = goal

    def _start(self, node: DerivNode) -> None:
        if node._started:
            return
        node._started = True
        heap = []
        for ei, edge in enumerate(node.incoming):
            ranks = (0,) * len(edge.tails)
            score = edge.delta
            ok = True
            for tail, r in zip(edge.tails, ranks):
                kth = self._kth(tail, r)
                if kth is None:
                    ok = False
                    break
                score += kth.score
            if ok:
                heapq.heappush(heap, (score, ei, ranks))
                node._pushed.add((ei, ranks))
        node._cand = heap

    def _kth(self, node: DerivNode, k: int) -> Optional[_Ranked]:
        self._start(node)
        while len(node._derivs) <= k and node._cand:
            score, ei, ranks = heapq.heappop(node._cand)
            edge = node.incoming[ei]
            node._derivs.append(_Ranked(score, edge, ranks))
            for i in range(len(ranks)):
                nxt = ranks[:i] + (ranks[i] + 1,) + ranks[i + 1 :]
                if (ei, nxt) in node._pushed:
                    continue
                kth = self._kth(edge.tails[i], nxt[i])
                if kth is None:
                    continue
                nscore = edge.delta + sum(
                    self._kth(edge.tails[j], nxt[j]).score
                    for j in range(len(nxt))
                )
                heapq.heappush(node._cand, (nscore, ei, nxt))
                node._pushed.add((ei, nxt))
        return node._derivs[k] if k < len(node._derivs) else None

    def _assemble(self, node: DerivNode, k: int) -> Optional[Packed]:
        ranked = self._kth(node, k)
        if ranked is None:
            return None
        child_packed = [
            self._assemble(tail, r)
            for tail, r in zip(ranked.edge.tails, ranked.ranks)
        ]
        words = ranked.edge.build(tuple(p.words for p in child_packed))
        features: dict[str, float] = {}
        add_features(features, ranked.edge.features)
        applications: list = []
        child_trees: list = []
        for p in child_packed:
            add_features(features, p.features)
            applications.extend(p.applications)
            child_trees.extend(p.trees)
        if ranked.edge.rule is not None:
            applications.append((ranked.edge.rule, ranked.edge.covered))
            trees: tuple = (
                Step(
                    ranked.edge.rule,
                    ranked.edge.covered,
                    dict(ranked.edge.features),
                    tuple(child_trees),
                ),
            )
        else:
            trees = tuple(child_trees)
        return Packed(ranked.score, words, features, tuple(applications), trees)

    def extract(
        self,
        k: int,
        distinct: Callable[[Packed], object] = Packed.signature_multiset,
        slack: int = 200,
    ) -> list[Packed]:
        """Up to k best derivations, deduplicated by `distinct`."""
        if k <= 0:
            raise ValueError("k must be positive")
        out: list[Packed] = []
        seen = set()
        rank = 0
        while len(out) < k and rank < k + slack:
            packed = self._assemble(self.goal, rank)
            rank += 1
            if packed is None:
                break
            sig = distinct(packed)
            if sig in seen:
                continue
            seen.add(sig)
            out.append(packed)
        return out
