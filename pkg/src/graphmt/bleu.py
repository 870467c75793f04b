"""Corpus-level BLEU-4 with clipped counts and brevity penalty.

Counts are pooled over the corpus, precision is the strict geometric mean
(any zero n-gram bucket zeroes the score), and with several references the
per-sentence closest length (ties going to the shorter) enters the brevity
penalty while clipping uses the per-ngram maximum across references.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Sequence

MAX_ORDER = 4


def _ngrams(tokens: Sequence[str], order: int) -> Counter:
    return Counter(
        tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1)
    )


def corpus_bleu(
    hypotheses: Sequence[Sequence[str]],
    reference_sets: Sequence[Sequence[Sequence[str]]],
    smooth: bool = False,
) -> float:
    """BLEU-4 in percent.  `reference_sets[i]` lists the references of
    sentence i.  `smooth` adds one to every numerator and denominator."""
    if len(hypotheses) != len(reference_sets):
        raise ValueError(
            f"{len(hypotheses)} hypotheses vs {len(reference_sets)} reference rows"
        )
    matched = [0] * MAX_ORDER
    totals = [0] * MAX_ORDER
    hyp_len = 0
    ref_len = 0
    for hyp, refs in zip(hypotheses, reference_sets):
        if not refs:
            raise ValueError("a sentence has no references")
        hyp_len += len(hyp)
        ref_len += min(
            (len(r) for r in refs), key=lambda L: (abs(L - len(hyp)), L)
        )
        for order in range(1, MAX_ORDER + 1):
            grams = _ngrams(hyp, order)
            if not grams:
                continue
            clip: Counter = Counter()
            for ref in refs:
                ref_grams = _ngrams(ref, order)
                for gram in grams:
                    clip[gram] = max(clip[gram], ref_grams[gram])
            matched[order - 1] += sum(
                min(count, clip[gram]) for gram, count in grams.items()
            )
            totals[order - 1] += sum(grams.values())

    log_precision = 0.0
    for m, t in zip(matched, totals):
        if smooth:
            m, t = m + 1, t + 1
        if m == 0 or t == 0:
            return 0.0
        log_precision += math.log(m / t) / MAX_ORDER
    if hyp_len == 0:
        return 0.0
    brevity = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * brevity * math.exp(log_precision)
