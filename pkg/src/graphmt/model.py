"""Log-linear model plumbing shared by the decoders.

All feature values are costs: negative natural-log probabilities for the
model scores, plain counts for the penalties.  A derivation's total is the
weighted sum of its feature costs, and decoders minimize that total.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .lm import LOG10_TO_LN, BOS, EOS, LmState, NgramLM

RULE_FEATURES = ("tmFwd", "tmBwd", "lexFwd", "lexBwd")

SEG_FEATURES = RULE_FEATURES + (
    "lm",
    "rulePenalty",
    "wordPenalty",
    "distJump",
    "distGap",
)

SNRG_FEATURES = RULE_FEATURES + (
    "lm",
    "rulePenalty",
    "wordPenalty",
    "distJump",
    "gapPenalty",
    "gluePenalty",
)


class WeightsError(ValueError):
    pass


class Weights(dict):
    """Named feature weights, validated against a decoder's feature list."""

    @classmethod
    def uniform(cls, names: Sequence[str], value: float = 1.0) -> "Weights":
        return cls({name: value for name in names})

    @classmethod
    def for_decoder(
        cls, names: Sequence[str], overrides: Optional[Mapping[str, float]] = None
    ) -> "Weights":
        w = cls.uniform(names)
        for name, value in (overrides or {}).items():
            if name not in w:
                raise WeightsError(
                    f"unknown feature {name!r}; expected one of {', '.join(names)}"
                )
            w[name] = value
        return w

    def require(self, names: Sequence[str]) -> "Weights":
        missing = [name for name in names if name not in self]
        if missing:
            raise WeightsError(f"missing weights for: {', '.join(missing)}")
        return self

    def total(self, features: Mapping[str, float]) -> float:
        return sum(self.get(name, 0.0) * cost for name, cost in features.items())


def add_features(
    dst: dict[str, float], src: Mapping[str, float], scale: float = 1.0
) -> None:
    for name, cost in src.items():
        if cost:
            dst[name] = dst.get(name, 0.0) + scale * cost


@dataclass
class Step:
    """One rule application in a derivation trace."""

    rule: object
    covered: object
    features: dict[str, float]
    children: tuple["Step", ...] = ()


@dataclass
class Derivation:
    """Finished decoder output: target string, feature costs, total.

    `steps` lists rule applications in the order they fired; `trees` holds
    the same applications nested by antecedent for structured dumps.
    """

    translation: tuple[str, ...]
    features: dict[str, float]
    total: float
    steps: tuple[Step, ...] = ()
    trees: tuple[Step, ...] = ()

    def text(self) -> str:
        return " ".join(self.translation)


# ---------------------------------------------------------------------------
# Bottom-up language model scoring.
#
# An item built bottom-up knows only its own target words, so each word is
# scored with whatever left context exists inside the item.  When item A is
# concatenated with item B, the first order-1 words of B are rescored with
# the context extended into A's suffix.  Keeping the first and last order-1
# words per item is enough to compute every later correction, which is what
# makes (prefix, suffix) a sound recombination state.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LmBoundary:
    prefix: tuple[str, ...]
    suffix: tuple[str, ...]


def boundary_of(words: Sequence[str], order: int) -> LmBoundary:
    words = tuple(words)
    keep = max(order - 1, 0)
    if len(words) <= keep:
        return LmBoundary(words, words)
    return LmBoundary(words[:keep], words[-keep:])


def score_fresh(lm: NgramLM, words: Sequence[str]) -> float:
    """log10 score of new words using only in-sequence left context."""
    total = 0.0
    state: LmState = ()
    for word in words:
        lp, state = lm.score_word(state, word)
        total += lp
    return total


def junction_delta(lm: NgramLM, left_suffix: Sequence[str], right: LmBoundary) -> float:
    """log10 correction when a string with suffix `left_suffix` is extended
    on the right by an item whose first words are `right.prefix`."""
    delta = 0.0
    inner: tuple[str, ...] = ()
    for word in right.prefix:
        old = lm.logprob(inner, word)
        new = lm.logprob(tuple(left_suffix) + inner, word)
        delta += new - old
        inner = inner + (word,)
    return delta


def concat_boundary(a: LmBoundary, b: LmBoundary, order: int, a_len: int) -> LmBoundary:
    keep = max(order - 1, 0)
    if a_len >= keep:
        prefix = a.prefix
    else:
        prefix = (a.prefix + b.prefix)[:keep]
    suffix = (a.suffix + b.suffix)[-keep:] if keep else ()
    return LmBoundary(prefix, suffix)


def closing_delta(lm: NgramLM, boundary: LmBoundary) -> float:
    """log10 correction that turns an item's inside score into a full
    sentence score: rescore the prefix given <s> and append </s>."""
    delta = junction_delta(lm, (BOS,), boundary)
    delta += lm.logprob((BOS,) + boundary.suffix, EOS)
    return delta


def lm_cost(log10_score: float) -> float:
    """Convert a log10 probability into a natural-log cost."""
    return -log10_score * LOG10_TO_LN
