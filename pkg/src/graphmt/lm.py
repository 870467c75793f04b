"""Backoff n-gram language model with incremental scoring state.

Models are loaded from text files in the usual "\\data\\" / "\\n-grams:"
layout with base-10 log probabilities and optional backoff weights.  All
scores stay in log10 internally; callers convert at feature-aggregation
time (`LOG10_TO_LN`).

A scoring state is simply the tuple of up to order-1 most recent words, so
states compare and hash cheaply for hypothesis recombination.
"""

from __future__ import annotations

import math
from typing import IO, Iterable, Optional, Sequence

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

DEFAULT_OOV_LOG10 = -7.0

LOG10_TO_LN = math.log(10.0)

LmState = tuple[str, ...]


class LmFormatError(ValueError):
    pass


class NgramLM:
    """Queryable backoff model: log10 probabilities plus backoff weights."""

    def __init__(
        self,
        order: int,
        entries: dict[tuple[str, ...], tuple[float, float]],
        oov_log10: float = DEFAULT_OOV_LOG10,
    ) -> None:
        if order < 1:
            raise LmFormatError(f"order must be >= 1, got {order}")
        self.order = order
        self._entries = entries
        self.oov_log10 = oov_log10

    def initial_state(self) -> LmState:
        return (BOS,)

    def logprob(self, context: Sequence[str], word: str) -> float:
        """log10 p(word | context) with standard backoff recursion.

        A missing backoff weight counts as 0.  Unknown words fall back to
        the <unk> unigram when the model has one, else to a fixed floor.
        """
        context = tuple(context)
        if len(context) >= self.order:
            context = context[len(context) - self.order + 1 :]
        backoff_acc = 0.0
        while True:
            hit = self._entries.get(context + (word,))
            if hit is not None:
                return backoff_acc + hit[0]
            if not context:
                unk = self._entries.get((UNK,))
                if unk is not None:
                    return backoff_acc + unk[0]
                return backoff_acc + self.oov_log10
            entry = self._entries.get(context)
            if entry is not None:
                backoff_acc += entry[1]
            context = context[1:]

    def score_word(self, state: LmState, word: str) -> tuple[float, LmState]:
        """log10 p(word | state) and the successor state."""
        lp = self.logprob(state, word)
        if self.order == 1:
            return lp, ()
        return lp, (state + (word,))[-(self.order - 1) :]

    def score_sequence(
        self, words: Iterable[str], bos: bool = True, eos: bool = True
    ) -> float:
        """Fold of score_word from the sentence-start marker, in log10."""
        state: LmState = (BOS,) if bos else ()
        total = 0.0
        for word in words:
            lp, state = self.score_word(state, word)
            total += lp
        if eos:
            total += self.logprob(state, EOS)
        return total

    def unigram(self, word: str) -> float:
        """Context-free log10 score, used by future-cost estimation."""
        return self.logprob((), word)


def load_arpa(stream: IO[str], oov_log10: float = DEFAULT_OOV_LOG10) -> NgramLM:
    """Parse a text-format backoff model.

    Raises `LmFormatError` when a section's entry count disagrees with the
    header, or when the header is missing entirely.
    """
    declared: dict[int, int] = {}
    entries: dict[tuple[str, ...], tuple[float, float]] = {}
    seen: dict[int, int] = {}
    section: Optional[int] = None
    in_header = False

    for raw in stream:
        line = raw.strip()
        if not line:
            continue
        if line == "\\data\\":
            in_header = True
            continue
        if line == "\\end\\":
            section = None
            continue
        if line.startswith("\\") and line.endswith("-grams:"):
            in_header = False
            try:
                section = int(line[1:].split("-")[0])
            except ValueError as exc:
                raise LmFormatError(f"bad section header {line!r}") from exc
            if section not in declared:
                raise LmFormatError(f"section {line!r} missing from header")
            seen[section] = 0
            continue
        if in_header:
            if line.startswith("ngram"):
                spec = line[len("ngram") :].strip()
                n_str, _, count_str = spec.partition("=")
                try:
                    declared[int(n_str)] = int(count_str)
                except ValueError as exc:
                    raise LmFormatError(f"bad count line {line!r}") from exc
            continue
        if section is None:
            continue
        fields = line.split()
        if len(fields) == section + 2:
            backoff = float(fields[-1])
            words = tuple(fields[1:-1])
        elif len(fields) == section + 1:
            backoff = 0.0
            words = tuple(fields[1:])
        else:
            raise LmFormatError(
                f"{section}-gram entry has {len(fields)} fields: {line!r}"
            )
        entries[words] = (float(fields[0]), backoff)
        seen[section] += 1

    if not declared:
        raise LmFormatError("no \\data\\ header found")
    for n, count in declared.items():
        if seen.get(n, 0) != count:
            raise LmFormatError(
                f"header declares {count} {n}-grams, file has {seen.get(n, 0)}"
            )
    return NgramLM(max(declared), entries, oov_log10=oov_log10)


def write_arpa(
    order: int,
    entries: dict[tuple[str, ...], tuple[float, float]],
    stream: IO[str],
) -> None:
    """Serialize a model in the layout `load_arpa` accepts (test helper)."""
    by_order: dict[int, list[tuple[tuple[str, ...], tuple[float, float]]]] = {
        n: [] for n in range(1, order + 1)
    }
    for words, value in sorted(entries.items()):
        by_order[len(words)].append((words, value))
    stream.write("\\data\\\n")
    for n in range(1, order + 1):
        stream.write(f"ngram {n}={len(by_order[n])}\n")
    for n in range(1, order + 1):
        stream.write(f"\n\\{n}-grams:\n")
        for words, (logp, backoff) in by_order[n]:
            line = f"{logp}\t{' '.join(words)}"
            if backoff != 0.0:
                line += f"\t{backoff}"
            stream.write(line + "\n")
    stream.write("\n\\end\\\n")
