"""Beam-search decoder over graph segmentations.

The decoder walks the target sentence left to right.  Each hypothesis owns
a coverage set over source positions and is extended by translating any
uncovered subsequence that has a matching terminal rule, subject to a
distortion limit against the first uncovered position.  Hypotheses live in
stacks indexed by covered-word count, recombine on (coverage, language
model state, end of the last covered subsequence), and are histogram-pruned
against an admissible-ish future cost estimate.

Reordering is priced by two features: the jump from the previous
subsequence's end to the current one's begin, and the total gap length
inside the current subsequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .graph import DepGraph, GraphFragment, Subsequence, Terminal
from .kbest import DerivEdge, DerivNode, KBest, Packed
from .lm import EOS, NgramLM
from .model import Derivation, Step, Weights, add_features, lm_cost
from .rules import TranslationRule

OOV_SCORE = 100.0


class DecodeError(RuntimeError):
    def __init__(self, message: str, uncovered: tuple[int, ...] = ()):
        super().__init__(message)
        self.uncovered = uncovered


def distortion(prev: Optional[Subsequence], cur: Subsequence) -> tuple[int, int]:
    """Jump distance from the previous subsequence plus internal gap total.

    The very first rule of a derivation measures its jump against virtual
    position 0, so a sentence-initial rule jumps zero.
    """
    prev_end = prev.end if prev is not None and len(prev) else 0
    return abs(cur.begin - prev_end - 1), cur.gap_total()


def _passthrough_rule(g: DepGraph, pos: int) -> TranslationRule:
    frag = GraphFragment((Terminal(g.word(pos), g.tag(pos)),), ())
    return TranslationRule(
        "X", frag, (g.word(pos),), frozenset([(0, 0)]), (0.0, 0.0, 0.0, 0.0)
    )


def _with_passthrough(g, options, oov_passthrough):
    """Add copy-through singleton options for words no rule covers."""
    covered = set()
    for sub in options:
        covered.update(sub.positions)
    oov_positions = set()
    if oov_passthrough:
        full = dict(options)
        for pos in range(1, g.n + 1):
            if pos not in covered:
                oov_positions.add(pos)
                single = Subsequence((pos,))
                full.setdefault(single, []).append(_passthrough_rule(g, pos))
        return full, oov_positions
    return dict(options), oov_positions


def _append_words(words):
    def build(children):
        return children[0] + words

    return build


def _rule_feature_delta(rule, words, jump, gap, lm_log10):
    feats = {
        "tmFwd": (rule.features or (0.0,) * 4)[0],
        "tmBwd": (rule.features or (0.0,) * 4)[1],
        "lexFwd": (rule.features or (0.0,) * 4)[2],
        "lexBwd": (rule.features or (0.0,) * 4)[3],
        "rulePenalty": 1.0,
        "wordPenalty": float(len(words)),
        "distJump": float(jump),
        "distGap": float(gap),
        "lm": lm_cost(lm_log10),
    }
    return {k: v for k, v in feats.items() if v}


class FutureCost:
    """Span dynamic program over context-free option costs.

    Only options covering a continuous block enter the table; a span's cost
    is the cheapest combination of option applications and splits.  Words
    no option covers cost the pass-through penalty (or infinity when
    pass-through is off), keeping the estimate finite exactly when decoding
    can finish.
    """

    def __init__(self, g, options, weights, lm, oov_positions):
        n = g.n
        direct = [[math.inf] * (n + 1) for _ in range(n + 1)]
        for sub, rules in options.items():
            if not sub.is_continuous:
                continue
            i, j = sub.begin, sub.end
            for rule in rules:
                cost = self._context_free(rule, weights, lm)
                if rule.target == (g.word(i),) and i == j and i in oov_positions:
                    cost += OOV_SCORE
                direct[i][j] = min(direct[i][j], cost)
        table = [[math.inf] * (n + 1) for _ in range(n + 1)]
        for length in range(1, n + 1):
            for i in range(1, n - length + 2):
                j = i + length - 1
                best = direct[i][j]
                for k in range(i, j):
                    best = min(best, table[i][k] + table[k + 1][j])
                table[i][j] = best
        self.table = table
        self.n = n

    @staticmethod
    def _context_free(rule, weights, lm):
        feats = {
            "tmFwd": (rule.features or (0.0,) * 4)[0],
            "tmBwd": (rule.features or (0.0,) * 4)[1],
            "lexFwd": (rule.features or (0.0,) * 4)[2],
            "lexBwd": (rule.features or (0.0,) * 4)[3],
            "wordPenalty": float(len(rule.target)),
            "lm": lm_cost(sum(lm.unigram(w) for w in rule.target_terminals)),
        }
        return weights.total(feats)

    def __call__(self, coverage: frozenset) -> float:
        total = 0.0
        run_start = None
        for pos in range(1, self.n + 2):
            uncovered = pos <= self.n and pos not in coverage
            if uncovered and run_start is None:
                run_start = pos
            elif not uncovered and run_start is not None:
                total += self.table[run_start][pos - 1]
                run_start = None
        return total


def future_cost(g, coverage, options, weights, lm, oov_passthrough=True) -> float:
    """Estimated cost of finishing from `coverage` (stand-alone helper)."""
    full, oov_positions = _with_passthrough(g, options, oov_passthrough)
    return FutureCost(g, full, weights, lm, oov_positions)(frozenset(coverage))


@dataclass
class SegHypothesis:
    coverage: frozenset
    last: Optional[Subsequence]
    lm_state: tuple
    score: float
    future: float
    node: DerivNode


@dataclass
class SegResult:
    derivation: Derivation
    _goal: DerivNode

    def kbest(self, k: int) -> list[Derivation]:
        packs = KBest(self._goal).extract(k, distinct=_seg_signature)
        return [_packed_to_derivation(p) for p in packs]


def _seg_signature(packed: Packed):
    return packed.applications  # ordered application sequence


def _packed_to_derivation(p: Packed) -> Derivation:
    steps = tuple(Step(rule, covered, {}) for rule, covered in p.applications)
    return Derivation(p.words, p.features, p.score, steps, p.trees)


def decode(
    g: DepGraph,
    options: dict[Subsequence, list[TranslationRule]],
    weights: Weights,
    lm: NgramLM,
    beam_width: Optional[int] = 200,
    d_max: Optional[int] = 6,
    oov_passthrough: bool = True,
) -> SegResult:
    """Best-first segmentation decoding; raises DecodeError on dead ends."""
    n = g.n
    full_options, oov_positions = _with_passthrough(g, options, oov_passthrough)
    future = FutureCost(g, full_options, weights, lm, oov_positions)
    option_list = sorted(full_options.items(), key=lambda kv: kv[0].positions)

    stacks: list[dict] = [{} for _ in range(n + 1)]
    root = DerivNode()
    root.incoming.append(
        DerivEdge((), 0.0, {}, lambda children: (), rule=None, covered=None)
    )
    start = SegHypothesis(
        frozenset(), None, lm.initial_state(), 0.0, future(frozenset()), root
    )
    stacks[0][(start.coverage, start.lm_state, 0)] = start

    for i in range(n):
        stack = stacks[i]
        if not stack:
            continue
        hyps = sorted(stack.values(), key=lambda h: h.score + h.future)
        if beam_width is not None:
            hyps = hyps[:beam_width]
        for hyp in hyps:
            first_free = next(p for p in range(1, n + 1) if p not in hyp.coverage)
            for sub, rules in option_list:
                if d_max is not None and sub.begin > first_free + d_max:
                    continue
                if any(p in hyp.coverage for p in sub.positions):
                    continue
                jump, gap = distortion(hyp.last, sub)
                new_cov = hyp.coverage | set(sub.positions)
                for rule in rules:
                    words = rule.target_terminals
                    lm_log10 = 0.0
                    state = hyp.lm_state
                    for w in words:
                        lp, state = lm.score_word(state, w)
                        lm_log10 += lp
                    delta = _rule_feature_delta(rule, words, jump, gap, lm_log10)
                    delta_score = weights.total(delta)
                    if sub.positions[0] in oov_positions and len(sub) == 1 and (
                        rule.features == (0.0, 0.0, 0.0, 0.0)
                        and rule.target == (g.word(sub.positions[0]),)
                    ):
                        delta_score += OOV_SCORE
                    edge = DerivEdge(
                        (hyp.node,),
                        delta_score,
                        delta,
                        _append_words(words),
                        rule=rule,
                        covered=sub,
                    )
                    key = (new_cov, state, sub.end)
                    target_stack = stacks[len(new_cov)]
                    existing = target_stack.get(key)
                    score = hyp.score + delta_score
                    if existing is None:
                        node = DerivNode()
                        node.incoming.append(edge)
                        target_stack[key] = SegHypothesis(
                            new_cov, sub, state, score, future(new_cov), node
                        )
                    else:
                        existing.node.incoming.append(edge)
                        if score < existing.score:
                            existing.score = score
                            existing.last = sub

    final = stacks[n]
    if not final:
        uncovered = tuple(
            p
            for p in range(1, n + 1)
            if not any(p in sub.positions for sub in full_options)
        )
        raise DecodeError(
            f"no derivation covers the input; uncovered positions {uncovered}",
            uncovered,
        )

    goal = DerivNode()
    for hyp in final.values():
        eos_delta = {"lm": lm_cost(lm.logprob(hyp.lm_state, EOS))}
        goal.incoming.append(
            DerivEdge(
                (hyp.node,),
                weights.total(eos_delta),
                eos_delta,
                lambda children: children[0],
            )
        )
    best = KBest(goal).extract(1, distinct=_seg_signature)
    if not best:
        raise DecodeError("no complete derivation found")
    return SegResult(_packed_to_derivation(best[0]), goal)
