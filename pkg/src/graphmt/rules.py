"""Translation rules: extraction, feature estimation, table I/O, matching.

Two rule inventories are produced from word-aligned graph-string pairs:

  * subgraph-phrase pairs, where a connected induced subgraph translates
    into one continuous target phrase, and
  * recursive rules, obtained by replacing nested subgraph-phrase pairs
    inside a larger pair with linked non-terminals.

Candidate source subsequences start from the positions aligned into the
target phrase and may grow by unaligned words adjacent to a run boundary;
every candidate must be covered by a connected induced subgraph.

Rules carry four translation features stored as negative natural-log
probabilities: two relative frequencies and two alignment-factored lexical
weights.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Iterator, Optional, Sequence, Union

from .corpus import AlignedPair
from .graph import (
    BOTH,
    DEPENDENCY,
    SEQUENTIAL,
    DepGraph,
    FragNode,
    GraphError,
    GraphFragment,
    NonTerminal,
    Subsequence,
    Terminal,
    canonical_key,
    collapse,
    enumerate_connected_subsequences,
    induced_subgraph,
    nt_position,
)

GENERIC_NT = "X"
GLUE_NT = "S"

PROB_FLOOR = 1e-12

TargetToken = Union[str, NonTerminal]


class TableError(ValueError):
    def __init__(self, line_no: int, message: str) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class TranslationRule:
    """One synchronous rule: lhs, source fragment, target token sequence.

    Non-terminals on the two sides are paired through their link indices.
    `alignment` holds (source node index, target token index) links between
    terminals, 0-based on both sides.  `features` are the four translation
    costs in table order; empty until estimation has run.
    """

    lhs: str
    source: GraphFragment
    target: tuple[TargetToken, ...]
    alignment: frozenset[tuple[int, int]] = field(default_factory=frozenset)
    features: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        src_links = {nd.index for _, nd in self.source.nonterminals}
        tgt_links = {
            tok.index for tok in self.target if isinstance(tok, NonTerminal)
        }
        if src_links != tgt_links:
            raise GraphError(
                f"non-terminal links do not biject: {src_links} vs {tgt_links}"
            )

    @property
    def nt_count(self) -> int:
        return len(self.source.nonterminals)

    @property
    def is_glue(self) -> bool:
        return self.lhs == GLUE_NT

    @property
    def terminal_words(self) -> tuple[str, ...]:
        return tuple(nd.word for _, nd in self.source.terminals)

    @property
    def target_terminals(self) -> tuple[str, ...]:
        return tuple(tok for tok in self.target if isinstance(tok, str))

    def source_key(self, use_edge_labels: bool = False) -> str:
        return canonical_key(self.source, use_edge_labels)

    def cost(self) -> float:
        return sum(self.features)


def glue_rules() -> list[TranslationRule]:
    """The two concatenation rules that make any input graph coverable."""
    zero = (0.0, 0.0, 0.0, 0.0)
    pair = TranslationRule(
        GLUE_NT,
        GraphFragment((NonTerminal(GLUE_NT, 1), NonTerminal(GENERIC_NT, 2)), ()),
        (NonTerminal(GLUE_NT, 1), NonTerminal(GENERIC_NT, 2)),
        frozenset(),
        zero,
    )
    lift = TranslationRule(
        GLUE_NT,
        GraphFragment((NonTerminal(GENERIC_NT, 1),), ()),
        (NonTerminal(GENERIC_NT, 1),),
        frozenset(),
        zero,
    )
    return [pair, lift]


def pos_nonterminal(sub: Subsequence, g: DepGraph) -> str:
    """Tag-based non-terminal symbol for the subgraph covering `sub`.

    Heads are the nodes whose dependency head falls outside the
    subsequence; their POS tags are joined with '_' in position order.
    """
    if not sub.positions:
        raise GraphError("empty subsequence has no non-terminal symbol")
    head_of = {
        d: h for (h, d), label in g.edges.items() if label != SEQUENTIAL
    }
    heads = [p for p in sub if head_of.get(p) not in sub]
    return "_".join(g.tag(p) for p in heads)


# ---------------------------------------------------------------------------
# Extraction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Event:
    """One extraction occurrence inside a sentence pair."""

    sub: Subsequence
    tspan: tuple[int, int]
    parts: tuple[tuple[Subsequence, tuple[int, int]], ...] = ()

    def terminal_positions(self) -> Subsequence:
        taken: set[int] = set()
        for part_sub, _ in self.parts:
            taken.update(part_sub.positions)
        return Subsequence.of(p for p in self.sub if p not in taken)


def _spp_events(
    pair: AlignedPair, max_len: int
) -> list[tuple[Subsequence, tuple[int, int]]]:
    """All (subsequence, target span) pairs that form subgraph-phrase pairs."""
    g, target, links = pair.source, pair.target, pair.alignment
    by_target: dict[int, set[int]] = {}
    by_source: dict[int, set[int]] = {}
    for i, j in links:
        by_target.setdefault(j, set()).add(i)
        by_source.setdefault(i, set()).add(j)
    aligned_sources = set(by_source)

    out: list[tuple[Subsequence, tuple[int, int]]] = []
    for j1 in range(1, len(target) + 1):
        base: set[int] = set()
        for j2 in range(j1, min(j1 + max_len - 1, len(target)) + 1):
            base |= by_target.get(j2, set())
            if not base:
                continue
            if any(
                not (j1 <= j <= j2) for i in base for j in by_source[i]
            ):
                continue
            if len(base) > max_len:
                continue
            # Grow with unaligned words adjacent to a run boundary; every
            # distinct extension is a candidate of its own.
            seen = {frozenset(base)}
            queue = [frozenset(base)]
            while queue:
                cur = queue.pop()
                if len(cur) >= max_len:
                    continue
                for b, e in Subsequence.of(cur).runs:
                    for p in (b - 1, e + 1):
                        if (
                            1 <= p <= g.n
                            and p not in cur
                            and p not in aligned_sources
                        ):
                            grown = cur | {p}
                            if grown not in seen:
                                seen.add(grown)
                                queue.append(grown)
            for cur in seen:
                sub = Subsequence.of(cur)
                if induced_subgraph(g, sub) is not None:
                    out.append((sub, (j1, j2)))
    out.sort(key=lambda item: (item[0].positions, item[1]))
    return out


def _rule_from_event(
    pair: AlignedPair, event: _Event, pos_mode: bool = False
) -> TranslationRule:
    g = pair.source
    frag = induced_subgraph(g, event.sub)
    if frag is None:
        raise GraphError(f"no connected subgraph over {event.sub}")
    parts = sorted(event.parts, key=lambda part: nt_position(part[0]))
    for k, (part_sub, _) in enumerate(parts, start=1):
        symbol = pos_nonterminal(part_sub, g) if pos_mode else GENERIC_NT
        frag = collapse(frag, part_sub, symbol, k)
    lhs = pos_nonterminal(event.sub, g) if pos_mode else GENERIC_NT

    j1, j2 = event.tspan
    span_start = {span[0]: (k, span) for k, (_, span) in enumerate(parts, start=1)}
    tokens: list[TargetToken] = []
    token_of_target: dict[int, int] = {}
    j = j1
    while j <= j2:
        if j in span_start:
            k, (_, end) = span_start[j]
            tokens.append(NonTerminal(GENERIC_NT, k))
            j = end + 1
        else:
            token_of_target[j] = len(tokens)
            tokens.append(pair.target[j - 1])
            j += 1

    node_of_position = {
        cover.positions[0]: idx
        for idx, cover in enumerate(frag.cover or ())
        if len(cover) == 1 and isinstance(frag.nodes[idx], Terminal)
    }
    alignment = frozenset(
        (node_of_position[i], token_of_target[j])
        for i, j in pair.alignment
        if i in node_of_position and j in token_of_target
    )
    return TranslationRule(lhs, frag.pattern(), tuple(tokens), alignment)


def extract_spp(
    pair: AlignedPair, max_len: int = 7
) -> list[tuple[GraphFragment, tuple[str, ...], frozenset[tuple[int, int]]]]:
    """Subgraph-phrase pairs of one sentence pair, with local alignments."""
    out = []
    for sub, tspan in _spp_events(pair, max_len):
        rule = _rule_from_event(pair, _Event(sub, tspan))
        frag = induced_subgraph(pair.source, sub)
        assert frag is not None
        out.append((frag, tuple(rule.target_terminals), rule.alignment))
    return out


@dataclass(frozen=True)
class SnrgLimits:
    """Extraction caps for recursive rules."""

    init_len: int = 10
    max_symbols: int = 5
    max_nts: int = 2
    min_gap_size: int = 2
    pos_nonterminals: bool = False


def _snrg_events(pair: AlignedPair, limits: SnrgLimits) -> list[_Event]:
    spps = _spp_events(pair, limits.init_len)
    events: list[_Event] = []
    seen: set[tuple] = set()
    frontier: list[_Event] = [_Event(sub, tspan) for sub, tspan in spps]
    for event in frontier:
        seen.add((event.sub, event.tspan, frozenset()))
    idx = 0
    while idx < len(frontier):
        event = frontier[idx]
        idx += 1
        events.append(event)
        if len(event.parts) >= limits.max_nts:
            continue
        terminals = event.terminal_positions()
        taken_spans = [span for _, span in event.parts]
        for inner_sub, inner_span in spps:
            if len(inner_sub) < limits.min_gap_size:
                continue
            if not inner_sub.issubset(terminals):
                continue
            if not (event.tspan[0] <= inner_span[0] and inner_span[1] <= event.tspan[1]):
                continue
            if any(
                inner_span[0] <= e and b <= inner_span[1] for b, e in taken_spans
            ):
                continue
            parts = tuple(
                sorted(
                    event.parts + ((inner_sub, inner_span),),
                    key=lambda part: part[0].positions,
                )
            )
            key = (event.sub, event.tspan, frozenset(parts))
            if key not in seen:
                seen.add(key)
                frontier.append(_Event(event.sub, event.tspan, parts))
    events.sort(
        key=lambda ev: (ev.sub.positions, ev.tspan, tuple(
            (p.positions, span) for p, span in ev.parts
        ))
    )
    return events


def extract_snrg(
    pair: AlignedPair, limits: SnrgLimits = SnrgLimits()
) -> Counter:
    """Recursive rules from one pair, duplicates merged with counts."""
    counts: Counter = Counter()
    for event in _snrg_events(pair, limits):
        rule = _rule_from_event(pair, event, pos_mode=limits.pos_nonterminals)
        if len(rule.source.nodes) > limits.max_symbols:
            continue
        if not rule.alignment:
            continue
        counts[rule] += 1
    return counts


# ---------------------------------------------------------------------------
# Feature estimation
# ---------------------------------------------------------------------------

NULL_WORD = "<null>"


@dataclass
class LexTable:
    """Word translation probabilities from corpus alignment frequencies."""

    fwd: dict[tuple[str, str], float] = field(default_factory=dict)
    bwd: dict[tuple[str, str], float] = field(default_factory=dict)

    def w_fwd(self, s: str, t: str) -> float:
        return self.fwd.get((s, t), 0.0)

    def w_bwd(self, s: str, t: str) -> float:
        return self.bwd.get((s, t), 0.0)


def count_cooccurrences(pairs: Iterable[AlignedPair]) -> Counter:
    """Aligned word pair counts; unaligned words pair with the null word."""
    cooc: Counter = Counter()
    for pair in pairs:
        aligned_s = {i for i, _ in pair.alignment}
        aligned_t = {j for _, j in pair.alignment}
        for i, j in pair.alignment:
            cooc[(pair.source.word(i), pair.target[j - 1])] += 1
        for i in range(1, pair.source.n + 1):
            if i not in aligned_s:
                cooc[(pair.source.word(i), NULL_WORD)] += 1
        for j in range(1, len(pair.target) + 1):
            if j not in aligned_t:
                cooc[(NULL_WORD, pair.target[j - 1])] += 1
    return cooc


def lex_tables(cooc: Counter) -> LexTable:
    s_total: Counter = Counter()
    t_total: Counter = Counter()
    for (s, t), c in cooc.items():
        s_total[s] += c
        t_total[t] += c
    table = LexTable()
    for (s, t), c in cooc.items():
        table.fwd[(s, t)] = c / s_total[s]
        table.bwd[(s, t)] = c / t_total[t]
    return table


def _lex_weights(rule: TranslationRule, lex: LexTable) -> tuple[float, float]:
    """Alignment-factored product-of-averages in both directions."""
    source_words = {
        idx: node.word for idx, node in rule.source.terminals
    }
    target_words = {
        idx: tok
        for idx, tok in enumerate(rule.target)
        if isinstance(tok, str)
    }
    of_target: dict[int, list[int]] = {}
    of_source: dict[int, list[int]] = {}
    for u, v in rule.alignment:
        of_target.setdefault(v, []).append(u)
        of_source.setdefault(u, []).append(v)

    fwd = 1.0
    for v, t_word in target_words.items():
        sources = of_target.get(v)
        if sources:
            fwd *= sum(lex.w_fwd(source_words[u], t_word) for u in sources) / len(
                sources
            )
        else:
            fwd *= lex.w_fwd(NULL_WORD, t_word)
    bwd = 1.0
    for u, s_word in source_words.items():
        targets = of_source.get(u)
        if targets:
            bwd *= sum(lex.w_bwd(s_word, target_words[v]) for v in targets) / len(
                targets
            )
        else:
            bwd *= lex.w_bwd(s_word, NULL_WORD)
    return fwd, bwd


def _cost(p: float) -> float:
    return -math.log(max(p, PROB_FLOOR))


class RuleTable:
    """Finalized rule inventory keyed by the source fragment serialization."""

    def __init__(self, use_edge_labels: bool = False) -> None:
        self.use_edge_labels = use_edge_labels
        self._by_key: dict[str, list[TranslationRule]] = {}

    def add(self, rule: TranslationRule) -> None:
        key = rule.source_key(self.use_edge_labels)
        self._by_key.setdefault(key, []).append(rule)

    def sort(self, top_n: Optional[int] = None) -> None:
        for key, rules in self._by_key.items():
            rules.sort(key=lambda r: (r.cost(), _target_field(r.target), r.lhs))
            if top_n is not None:
                del rules[top_n:]

    def lookup(self, key: str) -> list[TranslationRule]:
        return self._by_key.get(key, [])

    def __iter__(self) -> Iterator[TranslationRule]:
        for key in sorted(self._by_key):
            yield from self._by_key[key]

    def __len__(self) -> int:
        return sum(len(rules) for rules in self._by_key.values())

    def terminal_rules(self) -> Iterator[TranslationRule]:
        return (r for r in self if r.nt_count == 0 and not r.is_glue)

    def nt_rules(self) -> Iterator[TranslationRule]:
        return (r for r in self if r.nt_count > 0 and not r.is_glue)

    def glue(self) -> list[TranslationRule]:
        return [r for r in self if r.is_glue]

    def max_terminal_size(self) -> int:
        return max((len(r.source.nodes) for r in self.terminal_rules()), default=0)

    @classmethod
    def from_rules(
        cls, rules: Iterable[TranslationRule], use_edge_labels: bool = False
    ) -> "RuleTable":
        table = cls(use_edge_labels)
        for rule in rules:
            table.add(rule)
        table.sort()
        return table


def estimate_features(
    counts: Counter,
    lex: LexTable,
    use_edge_labels: bool = False,
    top_n: Optional[int] = 30,
    add_glue: bool = False,
) -> RuleTable:
    """Score counted rule occurrences and build the final table.

    Translation probabilities are relative frequencies of the rule against
    its source and target marginals; occurrences that differ only in their
    internal alignment are merged, keeping the most frequent alignment.
    """
    grouped: dict[tuple, dict[frozenset, int]] = {}
    rule_of: dict[tuple, TranslationRule] = {}
    for rule, c in counts.items():
        ident = (rule.lhs, rule.source_key(use_edge_labels), _target_field(rule.target))
        grouped.setdefault(ident, {})
        grouped[ident][rule.alignment] = grouped[ident].get(rule.alignment, 0) + c
        rule_of.setdefault(ident, rule)

    merged: dict[tuple, tuple[TranslationRule, int]] = {}
    for ident, variants in grouped.items():
        total = sum(variants.values())
        best_alignment = min(
            variants.items(), key=lambda kv: (-kv[1], sorted(kv[0]))
        )[0]
        merged[ident] = (replace(rule_of[ident], alignment=best_alignment), total)

    src_marginal: Counter = Counter()
    tgt_marginal: Counter = Counter()
    for (lhs, key, target), (_, c) in merged.items():
        src_marginal[(lhs, key)] += c
        tgt_marginal[(lhs, target)] += c

    table = RuleTable(use_edge_labels)
    for (lhs, key, target), (rule, c) in merged.items():
        p_fwd = c / src_marginal[(lhs, key)]
        p_bwd = c / tgt_marginal[(lhs, target)]
        lex_fwd, lex_bwd = _lex_weights(rule, lex)
        scored = replace(
            rule,
            features=(_cost(p_fwd), _cost(p_bwd), _cost(lex_fwd), _cost(lex_bwd)),
        )
        table.add(scored)
    if add_glue:
        for rule in glue_rules():
            table.add(rule)
    table.sort(top_n)
    return table


# ---------------------------------------------------------------------------
# Corpus-level extraction
# ---------------------------------------------------------------------------


@dataclass
class ExtractionReport:
    occurrences: int = 0
    continuous: int = 0
    seq_linked: int = 0
    dep_linked: int = 0
    needs_both: int = 0

    def share(self, count: int) -> float:
        return 100.0 * count / self.occurrences if self.occurrences else 0.0


def _connected_with(g: DepGraph, sub: Subsequence, labels: tuple[str, ...]) -> bool:
    positions = set(sub.positions)
    if len(positions) <= 1:
        return True
    adj: dict[int, set[int]] = {p: set() for p in positions}
    for (h, d), label in g.edges.items():
        if label in labels and h in positions and d in positions:
            adj[h].add(d)
            adj[d].add(h)
    start = next(iter(positions))
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen == positions


def classify_occurrence(g: DepGraph, sub: Subsequence, report: ExtractionReport) -> None:
    report.occurrences += 1
    seq = _connected_with(g, sub, (SEQUENTIAL, BOTH))
    dep = _connected_with(g, sub, (DEPENDENCY, BOTH))
    if sub.is_continuous:
        report.continuous += 1
    if seq:
        report.seq_linked += 1
    if dep:
        report.dep_linked += 1
    if not seq and not dep:
        report.needs_both += 1


def extract_table(
    pairs: Iterable[AlignedPair],
    mode: str = "spp",
    spp_len: int = 7,
    limits: SnrgLimits = SnrgLimits(),
    use_edge_labels: bool = False,
    top_n: Optional[int] = 30,
    report: Optional[ExtractionReport] = None,
) -> RuleTable:
    """Run extraction over a corpus and return the scored table."""
    if mode not in ("spp", "snrg"):
        raise ValueError(f"unknown extraction mode {mode!r}")
    counts: Counter = Counter()
    cooc: Counter = Counter()
    for pair in pairs:
        cooc.update(count_cooccurrences([pair]))
        if mode == "spp":
            for sub, tspan in _spp_events(pair, spp_len):
                rule = _rule_from_event(pair, _Event(sub, tspan))
                counts[rule] += 1
                if report is not None:
                    classify_occurrence(pair.source, sub, report)
        else:
            for event in _snrg_events(pair, limits):
                rule = _rule_from_event(
                    pair, event, pos_mode=limits.pos_nonterminals
                )
                if len(rule.source.nodes) > limits.max_symbols:
                    continue
                if not rule.alignment:
                    continue
                counts[rule] += 1
                if report is not None:
                    classify_occurrence(pair.source, event.sub, report)
    return estimate_features(
        counts,
        lex_tables(cooc),
        use_edge_labels=use_edge_labels,
        top_n=top_n,
        add_glue=(mode == "snrg"),
    )


# ---------------------------------------------------------------------------
# Table serialization
# ---------------------------------------------------------------------------

FIELD_SEP = " ||| "


def _target_field(target: Sequence[TargetToken]) -> str:
    return " ".join(
        tok.token() if isinstance(tok, NonTerminal) else tok for tok in target
    )


def _format_float(v: float) -> str:
    return "0" if v == 0 else repr(v)


def format_rule(rule: TranslationRule, use_edge_labels: bool = False) -> str:
    nodes = " ".join(node.token() for node in rule.source.nodes)
    edges = " ".join(
        f"{h}-{d}:{label}" if use_edge_labels else f"{h}-{d}"
        for h, d, label in sorted(rule.source.edges, key=lambda e: (e[0], e[1]))
    )
    align = " ".join(f"{u}-{v}" for u, v in sorted(rule.alignment))
    feats = " ".join(_format_float(v) for v in (rule.features or (0.0,) * 4))
    return FIELD_SEP.join(
        (rule.lhs, nodes, edges, _target_field(rule.target), align, feats)
    )


def write_table(table: RuleTable, stream: IO[str]) -> None:
    for rule in table:
        stream.write(format_rule(rule, table.use_edge_labels) + "\n")


def _parse_node(token: str) -> FragNode:
    if token.startswith("[") and token.endswith("]") and "," in token:
        body = token[1:-1]
        symbol, _, idx = body.rpartition(",")
        if symbol and idx.isdigit():
            return NonTerminal(symbol, int(idx))
    return Terminal(token)


def parse_rule(line: str, line_no: int = 0) -> tuple[TranslationRule, bool]:
    """Parse one table line; also reports whether edge labels were present."""
    fields = [f.strip() for f in line.rstrip("\n").split("|||")]
    if len(fields) != 6:
        raise TableError(line_no, f"expected 6 fields, got {len(fields)}")
    lhs, nodes_f, edges_f, target_f, align_f, feats_f = fields
    if not lhs:
        raise TableError(line_no, "empty left-hand side")
    nodes = tuple(_parse_node(tok) for tok in nodes_f.split())
    if not nodes:
        raise TableError(line_no, "rule has no source nodes")
    labeled = False
    edges = []
    for tok in edges_f.split():
        head_dep, _, label = tok.partition(":")
        h_str, sep, d_str = head_dep.partition("-")
        if not sep or not h_str.isdigit() or not d_str.isdigit():
            raise TableError(line_no, f"malformed edge {tok!r}")
        h, d = int(h_str), int(d_str)
        if h >= len(nodes) or d >= len(nodes):
            raise TableError(line_no, f"edge {tok!r} out of node range")
        labeled = labeled or bool(label)
        edges.append((h, d, label or None))
    target = tuple(_parse_node_target(tok) for tok in target_f.split())
    alignment = set()
    for tok in align_f.split():
        u_str, sep, v_str = tok.partition("-")
        if not sep or not u_str.isdigit() or not v_str.isdigit():
            raise TableError(line_no, f"malformed alignment link {tok!r}")
        alignment.add((int(u_str), int(v_str)))
    try:
        features = tuple(float(v) for v in feats_f.split())
    except ValueError as exc:
        raise TableError(line_no, f"malformed features {feats_f!r}") from exc
    if len(features) != 4:
        raise TableError(line_no, f"expected 4 features, got {len(features)}")
    try:
        rule = TranslationRule(
            lhs,
            GraphFragment(nodes, tuple(sorted(edges))),
            target,
            frozenset(alignment),
            features,
        )
    except GraphError as exc:
        raise TableError(line_no, str(exc)) from exc
    return rule, labeled


def _parse_node_target(token: str) -> TargetToken:
    node = _parse_node(token)
    return node.word if isinstance(node, Terminal) else node


def read_table(stream: Iterable[str], use_edge_labels: Optional[bool] = None) -> RuleTable:
    rules: list[TranslationRule] = []
    saw_labels = False
    for line_no, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        rule, labeled = parse_rule(line, line_no)
        saw_labels = saw_labels or labeled
        rules.append(rule)
    if use_edge_labels is None:
        use_edge_labels = saw_labels
    table = RuleTable(use_edge_labels)
    for rule in rules:
        table.add(rule)
    return table


def write_lexicon(lex: LexTable, fwd_stream: IO[str], bwd_stream: IO[str]) -> None:
    for (s, t), p in sorted(lex.fwd.items()):
        fwd_stream.write(f"{s} {t} {_format_float(p)}\n")
    for (s, t), p in sorted(lex.bwd.items()):
        bwd_stream.write(f"{s} {t} {_format_float(p)}\n")


def read_lexicon(fwd_stream: Iterable[str], bwd_stream: Iterable[str]) -> LexTable:
    lex = LexTable()
    for line in fwd_stream:
        if line.strip():
            s, t, p = line.split()
            lex.fwd[(s, t)] = float(p)
    for line in bwd_stream:
        if line.strip():
            s, t, p = line.split()
            lex.bwd[(s, t)] = float(p)
    return lex


# ---------------------------------------------------------------------------
# Per-sentence matching
# ---------------------------------------------------------------------------


def match_options(
    table: RuleTable,
    g: DepGraph,
    max_size: Optional[int] = None,
    max_span: Optional[int] = None,
) -> dict[Subsequence, list[TranslationRule]]:
    """Terminal-rule translation options for one input graph.

    Every connected subsequence within the size and span limits is keyed by
    its induced fragment; rules whose source matches are listed under it.
    Rules containing non-terminals are matched during decoding, where
    candidate sub-items are re-collapsed and compared by canonical key.
    """
    terminal_index: dict[str, list[TranslationRule]] = {}
    for rule in table.terminal_rules():
        terminal_index.setdefault(
            rule.source_key(table.use_edge_labels), []
        ).append(rule)
    if not terminal_index:
        return {}
    largest = max(len(r.source.nodes) for rules in terminal_index.values() for r in rules)
    size_cap = largest if max_size is None else min(max_size, largest)
    options: dict[Subsequence, list[TranslationRule]] = {}
    for sub in sorted(
        enumerate_connected_subsequences(g, size_cap, max_span),
        key=lambda s: s.positions,
    ):
        frag = induced_subgraph(g, sub)
        if frag is None:
            continue
        rules = terminal_index.get(canonical_key(frag, table.use_edge_labels))
        if rules:
            options[sub] = list(rules)
    return options


def skeleton_placements(
    rule: TranslationRule, g: DepGraph, max_span: Optional[int] = None
) -> list[Subsequence]:
    """Position tuples where the rule's terminal skeleton occurs in g.

    The induced edge set over the chosen positions must equal the edges the
    rule keeps between its terminals; the authoritative re-collapse check
    happens later, so label mismatches are allowed through here.
    """
    terminals = rule.source.terminals
    if not terminals:
        return []
    words = [node.word for _, node in terminals]
    local_of = {orig: i for i, (orig, _) in enumerate(terminals)}
    skeleton = {
        (local_of[h], local_of[d])
        for h, d, _ in rule.source.edges
        if h in local_of and d in local_of
    }
    occurrences: dict[str, list[int]] = {}
    for p in range(1, g.n + 1):
        occurrences.setdefault(g.word(p), []).append(p)
    for word in words:
        if word not in occurrences:
            return []

    found: list[Subsequence] = []

    def walk(idx: int, chosen: list[int]) -> None:
        if idx == len(words):
            sub = Subsequence(tuple(chosen))
            induced = {
                (chosen.index(h), chosen.index(d))
                for (h, d) in g.edges
                if h in sub and d in sub
            }
            if induced == skeleton:
                found.append(sub)
            return
        for p in occurrences[words[idx]]:
            if chosen and p <= chosen[-1]:
                continue
            if max_span is not None:
                first = chosen[0] if chosen else p
                if p - first + 1 > max_span:
                    continue
            walk(idx + 1, chosen + [p])

    walk(0, [])
    return found
