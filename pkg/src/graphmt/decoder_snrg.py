"""Synchronous-grammar decoding as a weighted deductive system.

Items [symbol, covered-subsequence] are proven bottom-up: a terminal-only
rule matched somewhere in the input yields an item directly; a rule with
non-terminals consumes previously proven items whose covers join with the
rule's terminal positions.  An application is valid when the induced
subgraph over the joined cover, with each antecedent's cover collapsed back
to a non-terminal node, serializes to exactly the rule's source key.

Two search strategies share that machinery:

  * a beam decoder whose stacks group items by covered-word count, allowing
    discontinuous covers up to a size and span budget, and
  * a chart decoder restricted to continuous spans, with cube pruning over
    each cell's rule-by-antecedent grids.

Glue items (symbol S) concatenate proven items left-to-right by start
position; only they may cover a disconnected position set.  The gap feature
charges each non-glue application the positions its span skips; the
distortion feature prices glue concatenation in beam mode and is
identically zero in chart mode.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .graph import (
    DepGraph,
    GraphError,
    Subsequence,
    canonical_key,
    collapse,
    induced_subgraph,
    join,
    nt_position,
)
from .kbest import DerivEdge, DerivNode, KBest, Packed
from .lm import NgramLM
from .model import (
    Derivation,
    LmBoundary,
    Step,
    Weights,
    boundary_of,
    closing_delta,
    concat_boundary,
    junction_delta,
    lm_cost,
    score_fresh,
)
from .rules import GLUE_NT, RuleTable, TranslationRule, match_options, skeleton_placements

from .decoder_seg import DecodeError, distortion


def gap_count(covered: Subsequence, nt_subs: Sequence[Subsequence]) -> int:
    """Positions inside the covered span that neither a rule terminal nor a
    non-terminal's span interval accounts for."""
    filled: set[int] = set()
    nt_positions: set[int] = set()
    for s in nt_subs:
        filled.update(range(s.begin, s.end + 1))
        nt_positions.update(s.positions)
    terminals = {p for p in covered if p not in nt_positions}
    return covered.span - len(terminals | filled)


@dataclass
class SnrgItem:
    """A proven item with its scoring state and derivation node."""

    symbol: str
    covered: Subsequence
    boundary: LmBoundary
    word_count: int
    cost: float
    words: tuple[str, ...]
    node: DerivNode = field(default_factory=DerivNode)

    def state_key(self):
        return (self.symbol, self.covered, self.boundary)


@dataclass
class _CompiledRule:
    rule: TranslationRule
    nts: tuple  # NonTerminal nodes in source order
    chunks: tuple  # target template: ("w", words) and ("nt", index)
    base_features: dict[str, float]

    @property
    def terminal_count(self) -> int:
        return len(self.rule.source.terminals)


def _compile(rule: TranslationRule) -> _CompiledRule:
    chunks: list = []
    for tok in rule.target:
        if isinstance(tok, str):
            if chunks and chunks[-1][0] == "w":
                chunks[-1] = ("w", chunks[-1][1] + (tok,))
            else:
                chunks.append(("w", (tok,)))
        else:
            chunks.append(("nt", tok.index))
    feats = dict(
        zip(("tmFwd", "tmBwd", "lexFwd", "lexBwd"), rule.features or (0.0,) * 4)
    )
    feats = {k: v for k, v in feats.items() if v}
    if rule.is_glue:
        feats["gluePenalty"] = 1.0
    else:
        feats["rulePenalty"] = 1.0
    return _CompiledRule(
        rule, tuple(nd for _, nd in rule.source.nonterminals), tuple(chunks), feats
    )


@dataclass
class DecodeContext:
    g: DepGraph
    weights: Weights
    lm: NgramLM
    use_edge_labels: bool = False
    # Chart mode sets this: the continuity restriction forces both
    # reordering features to zero, and we verify that on every application.
    expect_zero_reordering: bool = False


def _recollapse_key(ctx: DecodeContext, covered, parts) -> Optional[str]:
    """Canonical key of the joined cover with antecedent covers collapsed."""
    frag = induced_subgraph(ctx.g, covered)
    if frag is None:
        return None
    try:
        for part_sub, symbol, index in sorted(parts, key=lambda p: nt_position(p[0])):
            frag = collapse(frag, part_sub, symbol, index)
    except GraphError:
        return None
    return canonical_key(frag, ctx.use_edge_labels)


def apply_rule(
    ctx: DecodeContext,
    crule: _CompiledRule,
    placement: Subsequence,
    antecedents: Sequence[SnrgItem],
    check_key: bool = True,
) -> Optional[SnrgItem]:
    """One inference: rule + placement + proven antecedents -> new item.

    Returns None when the pieces overlap, the joined cover has no covering
    subgraph (non-glue), or the re-collapsed fragment does not match the
    rule's source.
    """
    rule = crule.rule
    covered = placement
    for ant in antecedents:
        if any(p in covered for p in ant.covered.positions):
            return None
        covered = join(covered, ant.covered)
    ordered = sorted(antecedents, key=lambda a: nt_position(a.covered))
    if len(ordered) != len(crule.nts):
        return None
    for ant, nt in zip(ordered, crule.nts):
        if ant.symbol != nt.symbol:
            return None
    if not rule.is_glue and check_key:
        key = _recollapse_key(
            ctx,
            covered,
            [
                (ant.covered, nt.symbol, nt.index)
                for ant, nt in zip(ordered, crule.nts)
            ],
        )
        if key != rule.source_key(ctx.use_edge_labels):
            return None

    by_index = {
        nt.index: ant for ant, nt in zip(ordered, crule.nts)
    }
    feats = dict(crule.base_features)
    cost = sum(a.cost for a in antecedents)

    # Assemble the target string left to right, correcting the language
    # model at every junction.
    words: tuple[str, ...] = ()
    boundary = LmBoundary((), ())
    length = 0
    lm_log10 = 0.0
    for kind, payload in crule.chunks:
        if kind == "w":
            chunk_words = payload
            chunk_boundary = boundary_of(chunk_words, ctx.lm.order)
            chunk_len = len(chunk_words)
            lm_log10 += score_fresh(ctx.lm, chunk_words)
        else:
            ant = by_index[payload]
            chunk_words = ant.words
            chunk_boundary = ant.boundary
            chunk_len = ant.word_count
        if length and chunk_len:
            lm_log10 += junction_delta(ctx.lm, boundary.suffix, chunk_boundary)
        boundary = concat_boundary(boundary, chunk_boundary, ctx.lm.order, length)
        length += chunk_len
        words = words + chunk_words

    fresh = sum(len(p) for kind, p in crule.chunks if kind == "w")
    if fresh:
        feats["wordPenalty"] = float(fresh)
    if lm_log10:
        feats["lm"] = lm_cost(lm_log10)

    if rule.is_glue:
        if len(ordered) == 2:
            jump, gap = distortion(ordered[0].covered, ordered[1].covered)
            if ctx.expect_zero_reordering and (jump or gap):
                raise RuntimeError(
                    f"continuous-span decoding produced distortion {jump}+{gap}"
                )
            if jump or gap:
                feats["distJump"] = float(jump + gap)
    else:
        gaps = gap_count(covered, [a.covered for a in ordered])
        if ctx.expect_zero_reordering and gaps:
            raise RuntimeError(
                f"continuous-span decoding produced a gap count of {gaps}"
            )
        if gaps:
            feats["gapPenalty"] = float(gaps)

    delta = ctx.weights.total(feats)
    cost += delta
    item = SnrgItem(rule.lhs, covered, boundary, length, cost, words)
    item.node.incoming.append(
        DerivEdge(
            tuple(a.node for a in antecedents),
            delta,
            feats,
            _build_template(crule.chunks, [nt.index for nt in crule.nts]),
            rule=rule,
            covered=covered,
        )
    )
    return item


def _build_template(chunks, nt_order):
    """Target assembly callback: children arrive in antecedent order."""

    def build(children: tuple[tuple[str, ...], ...]) -> tuple[str, ...]:
        by_index = dict(zip(nt_order, children))
        out: tuple[str, ...] = ()
        for kind, payload in chunks:
            if kind == "w":
                out = out + payload
            else:
                out = out + by_index[payload]
        return out

    return build


def deduce_terminal(
    ctx: DecodeContext, rule: TranslationRule, placement: Subsequence
) -> Optional[SnrgItem]:
    """Inference for a terminal-only rule matched at `placement`."""
    return apply_rule(ctx, _compile(rule), placement, ())


def deduce_one_nt(
    ctx: DecodeContext,
    rule: TranslationRule,
    placement: Subsequence,
    item: SnrgItem,
) -> Optional[SnrgItem]:
    return apply_rule(ctx, _compile(rule), placement, (item,))


def deduce_two_nt(
    ctx: DecodeContext,
    rule: TranslationRule,
    placement: Subsequence,
    left: SnrgItem,
    right: SnrgItem,
) -> Optional[SnrgItem]:
    return apply_rule(ctx, _compile(rule), placement, (left, right))


@dataclass
class SnrgResult:
    derivation: Derivation
    _goal: DerivNode

    def kbest(self, k: int) -> list[Derivation]:
        packs = KBest(self._goal).extract(k)
        return [_packed_to_derivation(p) for p in packs]


def _packed_to_derivation(p: Packed) -> Derivation:
    steps = tuple(Step(rule, covered, {}) for rule, covered in p.applications)
    return Derivation(p.words, p.features, p.score, steps, p.trees)


def _finish(ctx: DecodeContext, goal_items: list[SnrgItem]) -> SnrgResult:
    if not goal_items:
        raise DecodeError("no derivation reaches the goal item")
    goal = DerivNode()
    for item in goal_items:
        feats = {"lm": lm_cost(closing_delta(ctx.lm, item.boundary))}
        goal.incoming.append(
            DerivEdge(
                (item.node,),
                ctx.weights.total(feats),
                feats,
                lambda children: children[0],
            )
        )
    best = KBest(goal).extract(1)
    if not best:
        raise DecodeError("no derivation reaches the goal item")
    return SnrgResult(_packed_to_derivation(best[0]), goal)


class _ItemPool:
    """Recombination on (symbol, covered, boundary); keeps the best cost and
    every incoming derivation edge."""

    def __init__(self):
        self.items: dict = {}

    def add(self, item: SnrgItem) -> None:
        key = item.state_key()
        existing = self.items.get(key)
        if existing is None:
            self.items[key] = item
        else:
            existing.node.incoming.extend(item.node.incoming)
            if item.cost < existing.cost:
                existing.cost = item.cost
                existing.words = item.words
                existing.word_count = item.word_count

    def pruned(self, beam_width: Optional[int]) -> list[SnrgItem]:
        ranked = sorted(self.items.values(), key=lambda it: it.cost)
        if beam_width is not None:
            ranked = ranked[:beam_width]
        return ranked


def decode_beam(
    g: DepGraph,
    table: RuleTable,
    weights: Weights,
    lm: NgramLM,
    beam_width: Optional[int] = 200,
    l_max: int = 20,
    span_max: int = 20,
) -> SnrgResult:
    """Stack decoding over discontinuous covers.

    Stacks are indexed by covered-word count and split by symbol; the X
    stack of each size is filled, pruned, and published to the chart before
    the glue stack of the same size consumes it.
    """
    ctx = DecodeContext(g, weights, lm, table.use_edge_labels)
    options = match_options(table, g, max_size=l_max, max_span=span_max)
    one_nt, two_nt = [], []
    for rule in table.nt_rules():
        crule = _compile(rule)
        placements = skeleton_placements(rule, g, max_span=span_max)
        if not placements:
            continue
        (one_nt if len(crule.nts) == 1 else two_nt).append((crule, placements))
    glue_pair = [
        _compile(r) for r in table.glue() if len(r.source.nonterminals) == 2
    ]
    glue_lift = [
        _compile(r) for r in table.glue() if len(r.source.nonterminals) == 1
    ]

    chart: dict[int, list[SnrgItem]] = {size: [] for size in range(1, g.n + 1)}

    def published(size: int, want_glue: bool):
        for item in chart.get(size, ()):
            if (item.symbol == GLUE_NT) == want_glue:
                yield item

    goal_items: list[SnrgItem] = []
    for l in range(1, g.n + 1):
        x_pool = _ItemPool()
        if l <= l_max:
            for sub, rules in options.items():
                if len(sub) != l or sub.span > span_max:
                    continue
                for rule in rules:
                    got = apply_rule(ctx, _compile(rule), sub, ())
                    if got is not None:
                        x_pool.add(got)
            for crule, placements in one_nt:
                t = crule.terminal_count
                if l - t < 1:
                    continue
                for placement in placements:
                    if len(placement) != t:
                        continue
                    for ant in published(l - t, want_glue=False):
                        got = apply_rule(ctx, crule, placement, (ant,))
                        if got is not None and got.covered.span <= span_max:
                            x_pool.add(got)
            for crule, placements in two_nt:
                t = crule.terminal_count
                rest = l - t
                if rest < 2:
                    continue
                for placement in placements:
                    if len(placement) != t:
                        continue
                    for l1 in range(1, rest):
                        for a in published(l1, want_glue=False):
                            for b in published(rest - l1, want_glue=False):
                                if nt_position(a.covered) > nt_position(b.covered):
                                    continue
                                got = apply_rule(ctx, crule, placement, (a, b))
                                if got is not None and got.covered.span <= span_max:
                                    x_pool.add(got)
        for item in x_pool.pruned(beam_width):
            chart[len(item.covered)].append(item)

        s_pool = _ItemPool()
        for crule in glue_lift:
            for ant in published(l, want_glue=False):
                got = apply_rule(ctx, crule, Subsequence(()), (ant,))
                if got is not None:
                    s_pool.add(got)
        for crule in glue_pair:
            for l1 in range(1, l):
                for left in published(l1, want_glue=True):
                    for right in published(l - l1, want_glue=False):
                        if nt_position(left.covered) > nt_position(right.covered):
                            continue
                        got = apply_rule(ctx, crule, Subsequence(()), (left, right))
                        if got is not None:
                            s_pool.add(got)
        for item in s_pool.pruned(beam_width):
            chart[len(item.covered)].append(item)
            if len(item.covered) == g.n:
                goal_items.append(item)

    return _finish(ctx, goal_items)


# ---------------------------------------------------------------------------
# Chart decoding
# ---------------------------------------------------------------------------


def _span_sub(i: int, j: int) -> Subsequence:
    """Positions i+1..j as a subsequence (spans use fence-post indices)."""
    return Subsequence(tuple(range(i + 1, j + 1)))


def decode_chart(
    g: DepGraph,
    table: RuleTable,
    weights: Weights,
    lm: NgramLM,
    beam_width: Optional[int] = 200,
    g_max: int = 20,
) -> SnrgResult:
    """CKY-style decoding with items restricted to continuous spans.

    A cell is populated only when its span has a covering subgraph; glue
    items always start at the sentence beginning.  Each cell expands its
    candidate grids best-first with a pop budget of `beam_width`.
    """
    ctx = DecodeContext(
        g, weights, lm, table.use_edge_labels, expect_zero_reordering=True
    )
    n = g.n
    options = match_options(table, g, max_size=g_max, max_span=g_max)
    nt_rules = []
    for rule in table.nt_rules():
        crule = _compile(rule)
        placements = skeleton_placements(rule, g, max_span=g_max)
        if placements:
            nt_rules.append((crule, placements))
    glue_pair = [
        _compile(r) for r in table.glue() if len(r.source.nonterminals) == 2
    ]
    glue_lift = [
        _compile(r) for r in table.glue() if len(r.source.nonterminals) == 1
    ]

    cells: dict[tuple[int, int], list[SnrgItem]] = {}

    def cell_items(i: int, j: int, glue: bool) -> list[SnrgItem]:
        return [
            it
            for it in cells.get((i, j), ())
            if (it.symbol == GLUE_NT) == glue
        ]

    def run_cube(grids, pop_limit) -> list[SnrgItem]:
        """Best-first expansion of (rule, axes) grids with a pop budget."""
        pool = _ItemPool()
        heap = []
        pushed = set()
        counter = itertools.count()

        def push(gi, ranks):
            if (gi, ranks) in pushed:
                return
            pushed.add((gi, ranks))
            crule, placement, axes = grids[gi]
            ants = []
            for axis, r in zip(axes, ranks):
                if r >= len(axis):
                    return
                ants.append(axis[r])
            got = apply_rule(ctx, crule, placement, tuple(ants), check_key=False)
            if got is None:
                return
            heapq.heappush(heap, (got.cost, next(counter), gi, ranks, got))

        for gi in range(len(grids)):
            push(gi, (0,) * len(grids[gi][2]))
        pops = 0
        while heap and (pop_limit is None or pops < pop_limit):
            _, _, gi, ranks, item = heapq.heappop(heap)
            pops += 1
            pool.add(item)
            for axis_i in range(len(ranks)):
                push(gi, ranks[:axis_i] + (ranks[axis_i] + 1,) + ranks[axis_i + 1 :])
        return pool.pruned(beam_width)

    def validated_grid(crule, placement, hole_subs):
        """Check the re-collapse once per grid; antecedent items of a chart
        cell share their covered span, so validity does not depend on which
        item is chosen."""
        parts = [
            (sub, nt.symbol, nt.index)
            for sub, nt in zip(hole_subs, crule.nts)
        ]
        key = _recollapse_key(ctx, _span_sub_union(placement, hole_subs), parts)
        return key == crule.rule.source_key(ctx.use_edge_labels)

    def _span_sub_union(placement, hole_subs):
        covered = placement
        for sub in hole_subs:
            covered = join(covered, sub)
        return covered

    goal_cell: list[SnrgItem] = []
    for length in range(1, n + 1):
        for i in range(0, n - length + 1):
            j = i + length
            if length <= g_max:
                span = _span_sub(i, j)
                if induced_subgraph(g, span) is not None:
                    grids = []
                    for rule in options.get(span, ()):  # terminal rules
                        grids.append((_compile(rule), span, ()))
                    for crule, placements in nt_rules:
                        for placement in placements:
                            if not placement.issubset(span):
                                continue
                            remaining = span.difference(placement)
                            if not remaining.positions:
                                continue
                            holes = remaining.runs
                            assignments = []
                            if len(crule.nts) == 1 and len(holes) == 1:
                                assignments.append([remaining])
                            elif len(crule.nts) == 2:
                                if len(holes) == 2:
                                    assignments.append(
                                        [
                                            Subsequence(tuple(range(b, e + 1)))
                                            for b, e in holes
                                        ]
                                    )
                                elif len(holes) == 1:
                                    b, e = holes[0]
                                    for split in range(b, e):
                                        assignments.append(
                                            [
                                                Subsequence(tuple(range(b, split + 1))),
                                                Subsequence(tuple(range(split + 1, e + 1))),
                                            ]
                                        )
                            for holes_assign in assignments:
                                if not validated_grid(crule, placement, holes_assign):
                                    continue
                                axes = []
                                ok = True
                                for sub, nt in zip(holes_assign, crule.nts):
                                    axis = [
                                        it
                                        for it in cell_items(
                                            sub.begin - 1, sub.end, glue=False
                                        )
                                        if it.symbol == nt.symbol
                                    ]
                                    if not axis:
                                        ok = False
                                        break
                                    axes.append(axis)
                                if ok:
                                    grids.append((crule, placement, tuple(axes)))
                    if grids:
                        cells.setdefault((i, j), []).extend(
                            run_cube(grids, beam_width)
                        )
            if i == 0:
                grids = []
                for crule in glue_lift:
                    axis = cell_items(0, j, glue=False)
                    if axis:
                        grids.append((crule, Subsequence(()), (axis,)))
                for crule in glue_pair:
                    for k in range(1, j):
                        left = cell_items(0, k, glue=True)
                        right = cell_items(k, j, glue=False)
                        if left and right:
                            grids.append((crule, Subsequence(()), (left, right)))
                if grids:
                    new_items = run_cube(grids, beam_width)
                    cells.setdefault((0, j), []).extend(new_items)
                    if j == n:
                        goal_cell.extend(new_items)

    return _finish(ctx, goal_cell)
