"""Readers and writers for parsed bitext.

Three line-oriented formats are handled:

  * CoNLL-style dependency trees (one token per line, blank-line separated;
    only the ID, FORM, POSTAG and HEAD columns are consumed),
  * alignment files with 0-based "i-j" links, one sentence pair per line,
  * tokenized target text, one sentence per line.

Malformed sentences are skipped with a warning so extraction can run over
large noisy corpora; skip counts are reported through `CorpusStats`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Optional

from .graph import DepGraph, GraphError, MalformedTreeError, _check_tree

log = logging.getLogger("graphmt.corpus")


class CorpusError(ValueError):
    """Unrecoverable corpus-level problem (e.g. stream length mismatch)."""


class ConllError(ValueError):
    def __init__(self, line_no: int, message: str) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class AlignmentError(ValueError):
    def __init__(self, line_no: int, token: str) -> None:
        super().__init__(f"line {line_no}: malformed link {token!r}")
        self.line_no = line_no


@dataclass
class CorpusStats:
    sentences: int = 0
    skipped_sentences: int = 0
    pairs: int = 0
    skipped_pairs: int = 0


@dataclass(frozen=True)
class AlignedPair:
    """One word-aligned graph-string pair.

    `alignment` holds 1-based (source position, target position) links.
    """

    source: DepGraph
    target: tuple[str, ...]
    alignment: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        for i, j in self.alignment:
            if not (1 <= i <= self.source.n):
                raise CorpusError(f"alignment source index {i} out of range")
            if not (1 <= j <= len(self.target)):
                raise CorpusError(f"alignment target index {j} out of range")

    def links_of_source(self, i: int) -> frozenset[int]:
        return frozenset(j for (s, j) in self.alignment if s == i)

    def links_of_target(self, j: int) -> frozenset[int]:
        return frozenset(i for (i, t) in self.alignment if t == j)


def _tree_from_rows(rows: list[tuple[int, str, str, int]], first_line: int) -> DepGraph:
    n = len(rows)
    for idx, (tid, _, _, head) in enumerate(rows):
        if tid != idx + 1:
            raise ConllError(first_line + idx, f"token id {tid}, expected {idx + 1}")
        if not (0 <= head <= n):
            raise ConllError(first_line + idx, f"HEAD {head} out of range 0..{n}")
        if head == tid:
            raise ConllError(first_line + idx, "token headed by itself")
    tokens = [(form, tag) for _, form, tag, _ in rows]
    edges = [(head, tid) for tid, _, _, head in rows if head != 0]
    try:
        g = DepGraph(tokens, edges)
        _check_tree(g)
    except GraphError as exc:
        raise ConllError(first_line, str(exc)) from exc
    return g


def read_conll(
    stream: Iterable[str],
    stats: Optional[CorpusStats] = None,
    strict: bool = False,
) -> Iterator[DepGraph]:
    """Yield one dependency tree per blank-line separated block.

    Bad blocks raise `ConllError` in strict mode; otherwise they are skipped
    and counted in `stats.skipped_sentences`.
    """
    rows: list[tuple[int, str, str, int]] = []
    block_start = 1
    broken: Optional[ConllError] = None

    def flush() -> Optional[DepGraph]:
        nonlocal rows, broken
        if not rows and broken is None:
            return None
        if stats is not None:
            stats.sentences += 1
        error, broken = broken, None
        current, rows = rows, []
        if error is None:
            try:
                return _tree_from_rows(current, block_start)
            except ConllError as exc:
                error = exc
        if strict:
            raise error
        log.warning("skipping sentence: %s", error)
        if stats is not None:
            stats.skipped_sentences += 1
        return None

    line_no = 0
    for line_no, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if not line.strip():
            tree = flush()
            if tree is not None:
                yield tree
            block_start = line_no + 1
            continue
        if broken is not None:
            continue
        if not rows:
            block_start = line_no
        cols = line.split("\t")
        if len(cols) == 1:
            cols = line.split()
        if len(cols) < 7:
            broken = ConllError(line_no, f"expected at least 7 columns, got {len(cols)}")
            continue
        try:
            tid = int(cols[0])
            head = int(cols[6])
        except ValueError:
            broken = ConllError(line_no, f"non-integer ID or HEAD in {line!r}")
            continue
        rows.append((tid, cols[1], cols[4], head))
    tree = flush()
    if tree is not None:
        yield tree


def write_conll(trees: Iterable[DepGraph], stream: IO[str]) -> None:
    """Inverse of `read_conll`; unused columns are written as underscores."""
    for g in trees:
        heads = {d: h for (h, d), label in g.edges.items() if label != "sequential"}
        for pos in range(1, g.n + 1):
            cols = (
                str(pos),
                g.word(pos),
                "_",
                "_",
                g.tag(pos),
                "_",
                str(heads.get(pos, 0)),
                "_",
                "_",
                "_",
            )
            stream.write("\t".join(cols) + "\n")
        stream.write("\n")


def read_alignments(stream: Iterable[str]) -> Iterator[frozenset[tuple[int, int]]]:
    """Yield one link set per line; the 0-based file indices become 1-based."""
    for line_no, line in enumerate(stream, start=1):
        links: set[tuple[int, int]] = set()
        for token in line.split():
            left, sep, right = token.partition("-")
            if not sep or not left.isdigit() or not right.isdigit():
                raise AlignmentError(line_no, token)
            links.add((int(left) + 1, int(right) + 1))
        yield frozenset(links)


def write_alignments(
    alignments: Iterable[frozenset[tuple[int, int]]], stream: IO[str]
) -> None:
    for links in alignments:
        stream.write(
            " ".join(f"{i - 1}-{j - 1}" for i, j in sorted(links)) + "\n"
        )


def read_targets(stream: Iterable[str]) -> Iterator[tuple[str, ...]]:
    for line in stream:
        yield tuple(line.split())


_END = object()


def zip_corpus(
    trees: Iterable[DepGraph],
    targets: Iterable[tuple[str, ...]],
    alignments: Iterable[frozenset[tuple[int, int]]],
    stats: Optional[CorpusStats] = None,
) -> Iterator[AlignedPair]:
    """Zip the three streams into AlignedPair records, validating bounds.

    A length mismatch raises `CorpusError` naming the stream that ran short;
    a pair with out-of-range links is skipped and counted.
    """
    t_iter, g_iter, a_iter = iter(trees), iter(targets), iter(alignments)
    names = ("trees", "targets", "alignments")
    index = 0
    while True:
        items = (
            next(t_iter, _END),
            next(g_iter, _END),
            next(a_iter, _END),
        )
        ended = [name for name, item in zip(names, items) if item is _END]
        if len(ended) == 3:
            return
        if ended:
            raise CorpusError(
                f"corpus streams disagree in length: {', '.join(ended)} "
                f"ended at pair {index}"
            )
        index += 1
        tree, target, alignment = items
        try:
            pair = AlignedPair(tree, target, alignment)
        except CorpusError as exc:
            log.warning("skipping pair %d: %s", index, exc)
            if stats is not None:
                stats.skipped_pairs += 1
            continue
        if stats is not None:
            stats.pairs += 1
        yield pair
