"""Command-line surface: graph, extract, translate, bleu.

Defaults mirror the shipped experiment settings: phrase length 7 for flat
extraction, initial pairs up to 10 with at most 5 source symbols and 2
linked non-terminals for recursive extraction, distortion limit 6, beam
width 200, and size/span budget 20 for the discontinuous-item decoder.

A config file holds "key = value" lines; command-line flags override it,
and feature weights are given as repeated `--weight name:value` flags.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from typing import Optional

from . import bleu as bleu_mod
from .corpus import (
    CorpusStats,
    read_alignments,
    read_conll,
    read_targets,
    zip_corpus,
)
from .decoder_seg import DecodeError, decode as seg_decode
from .decoder_snrg import decode_beam, decode_chart
from .graph import DepGraph, NonTerminal, build_dbg, build_dsg
from .lm import load_arpa
from .model import SEG_FEATURES, SNRG_FEATURES, Weights, WeightsError
from .rules import (
    ExtractionReport,
    SnrgLimits,
    classify_occurrence,
    estimate_features,
    extract_table,
    lex_tables,
    match_options,
    read_table,
    write_lexicon,
    write_table,
)

log = logging.getLogger("graphmt")

GRAPH_KINDS = ("tree", "dbg", "dsg")
DECODERS = ("seg", "snrg-beam", "snrg-chart")

CONFIG_KEYS = (
    "decoder",
    "kind",
    "beam",
    "d_max",
    "l_max",
    "span_max",
    "g_max",
    "kbest",
)


def build_graph(tree: DepGraph, kind: str) -> DepGraph:
    if kind == "tree":
        return tree
    if kind == "dbg":
        return build_dbg(tree)
    if kind == "dsg":
        return build_dsg(tree)
    raise ValueError(f"unknown graph kind {kind!r}")


def load_config(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise SystemExit(f"{path}:{line_no}: expected key = value")
            values[key.strip()] = value.strip()
    return values


def parse_weight_flags(flags, names) -> dict[str, float]:
    overrides: dict[str, float] = {}
    for flag in flags or ():
        name, sep, value = flag.partition(":")
        if not sep:
            raise SystemExit(f"--weight expects name:value, got {flag!r}")
        name = name.strip()
        if name not in names:
            raise SystemExit(
                f"unknown feature {name!r}; expected one of {', '.join(names)}"
            )
        try:
            overrides[name] = float(value)
        except ValueError:
            raise SystemExit(f"--weight {flag!r}: value is not a number")
    return overrides


# ---------------------------------------------------------------------------
# graph
# ---------------------------------------------------------------------------


def _open(path: str, mode: str = "r"):
    try:
        return open(path, mode, encoding="utf-8")
    except OSError as exc:
        raise SystemExit(f"{path}: {exc.strerror or exc}")


def cmd_graph(args) -> int:
    stats = CorpusStats()
    with _open(args.input) as handle:
        for index, tree in enumerate(read_conll(handle, stats=stats), start=1):
            g = build_graph(tree, args.kind)
            if args.dot:
                print(f"digraph sent{index} {{")
                for pos in range(1, g.n + 1):
                    print(f'  n{pos} [label="{pos}:{g.word(pos)}"];')
                for (h, d), label in sorted(g.edges.items()):
                    print(f'  n{h} -> n{d} [label="{label}"];')
                print("}")
            else:
                nodes = " ".join(
                    f"{p}:{g.word(p)}/{g.tag(p)}" for p in range(1, g.n + 1)
                )
                edges = " ".join(
                    f"{h}->{d}:{label}" if args.labels else f"{h}->{d}"
                    for (h, d), label in sorted(g.edges.items())
                )
                print(f"# sentence {index}")
                print(f"nodes\t{nodes}")
                print(f"edges\t{edges}")
    if stats.skipped_sentences:
        log.warning("skipped %d malformed sentences", stats.skipped_sentences)
    return 0


# ---------------------------------------------------------------------------
# extract
# ---------------------------------------------------------------------------


def _pair_counts(pair, mode, spp_len, limits):
    """Per-pair extraction payload: rule counts, word co-occurrence counts,
    and the covered subsequences of each counted occurrence."""
    from .rules import _Event, _rule_from_event, _snrg_events, _spp_events
    from .rules import count_cooccurrences

    counts: Counter = Counter()
    occurrence_subs = []
    if mode == "spp":
        for sub, tspan in _spp_events(pair, spp_len):
            counts[_rule_from_event(pair, _Event(sub, tspan))] += 1
            occurrence_subs.append(sub)
    else:
        for event in _snrg_events(pair, limits):
            rule = _rule_from_event(pair, event, pos_mode=limits.pos_nonterminals)
            if len(rule.source.nodes) > limits.max_symbols or not rule.alignment:
                continue
            counts[rule] += 1
            occurrence_subs.append(event.sub)
    return counts, count_cooccurrences([pair]), occurrence_subs


def _extract_worker(payload):
    pair, mode, spp_len, limits = payload
    return pair, _pair_counts(pair, mode, spp_len, limits)


def cmd_extract(args) -> int:
    limits = SnrgLimits(
        init_len=args.init_len,
        max_symbols=args.max_symbols,
        max_nts=args.max_nts,
        min_gap_size=args.mgs,
        pos_nonterminals=args.pos_nt,
    )
    stats = CorpusStats()
    with _open(args.source) as src, _open(args.target) as tgt, _open(
        args.align
    ) as aln:
        pairs = (
            zip_corpus(
                (build_graph(t, args.kind) for t in read_conll(src, stats=stats)),
                read_targets(tgt),
                read_alignments(aln),
                stats=stats,
            )
        )
        report = ExtractionReport()
        counts: Counter = Counter()
        cooc: Counter = Counter()
        jobs = [(pair, args.mode, args.max_len, limits) for pair in pairs]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_extract_worker, jobs, chunksize=8))
    else:
        results = [(pair, _pair_counts(pair, mode, L, lim)) for pair, mode, L, lim in jobs]
    for pair, (pair_rules, pair_cooc, occurrence_subs) in results:
        counts.update(pair_rules)
        cooc.update(pair_cooc)
        for sub in occurrence_subs:
            classify_occurrence(pair.source, sub, report)

    table = estimate_features(
        counts,
        lex_tables(cooc),
        use_edge_labels=args.labels,
        top_n=args.top_n,
        add_glue=(args.mode == "snrg"),
    )
    with _open(args.output, "w") as out:
        write_table(table, out)
    if args.lexicon:
        with _open(args.lexicon + ".s2t", "w") as fwd, _open(
            args.lexicon + ".t2s", "w"
        ) as bwd:
            write_lexicon(lex_tables(cooc), fwd, bwd)

    print(
        f"pairs: {stats.pairs} (skipped {stats.skipped_sentences} sentences, "
        f"{stats.skipped_pairs} pairs)",
        file=sys.stderr,
    )
    print(
        f"rule occurrences: {report.occurrences}; distinct rules: {len(table)}",
        file=sys.stderr,
    )
    print(
        "continuous: {:.1f}%  sequential-linked: {:.1f}%  "
        "dependency-linked: {:.1f}%  needs-both: {:.1f}%".format(
            report.share(report.continuous),
            report.share(report.seq_linked),
            report.share(report.dep_linked),
            report.share(report.needs_both),
        ),
        file=sys.stderr,
    )
    return 0


# ---------------------------------------------------------------------------
# translate
# ---------------------------------------------------------------------------


_WORKER: dict = {}


def _translate_init(table, lm, weights, cfg):
    _WORKER["table"] = table
    _WORKER["lm"] = lm
    _WORKER["weights"] = weights
    _WORKER["cfg"] = cfg


def _translate_one(indexed):
    index, tree = indexed
    return index, _decode_tree(
        tree, _WORKER["table"], _WORKER["lm"], _WORKER["weights"], _WORKER["cfg"]
    )


def _decode_tree(tree, table, lm, weights, cfg):
    g = build_graph(tree, cfg["kind"])
    try:
        if cfg["decoder"] == "seg":
            options = match_options(table, g)
            result = seg_decode(
                g,
                options,
                weights,
                lm,
                beam_width=cfg["beam"],
                d_max=cfg["d_max"],
                oov_passthrough=cfg["oov"],
            )
        elif cfg["decoder"] == "snrg-beam":
            result = decode_beam(
                g,
                table,
                weights,
                lm,
                beam_width=cfg["beam"],
                l_max=cfg["l_max"],
                span_max=cfg["span_max"],
            )
        else:
            result = decode_chart(
                g,
                table,
                weights,
                lm,
                beam_width=cfg["beam"],
                g_max=cfg["g_max"],
            )
    except DecodeError as exc:
        return None, str(exc)
    lines = []
    if cfg["kbest"] > 1:
        for rank, deriv in enumerate(result.kbest(cfg["kbest"]), start=1):
            feats = " ".join(
                f"{name}={deriv.features.get(name, 0.0):g}"
                for name in cfg["feature_names"]
            )
            lines.append(
                f"{rank} ||| {deriv.text()} ||| {feats} ||| {deriv.total:.6f}"
            )
    else:
        lines.append(result.derivation.text())
    dump = _format_derivation(result.derivation, cfg) if cfg["dump"] else None
    return lines, dump


def _rule_repr(rule) -> str:
    src = " ".join(node.token() for node in rule.source.nodes)
    tgt = " ".join(
        tok.token() if isinstance(tok, NonTerminal) else tok for tok in rule.target
    )
    return f"{rule.lhs} -> {src} / {tgt}"


def _format_derivation(derivation, cfg) -> str:
    if cfg["decoder"] == "seg":
        rows = []
        for i, step in enumerate(derivation.steps, start=1):
            feats = ",".join(
                f"{k}={v:g}" for k, v in sorted(step.features.items())
            ) if step.features else ""
            rows.append(
                "\t".join(
                    (str(i), _rule_repr(step.rule), repr(step.covered), feats)
                )
            )
        return "\n".join(rows)

    def bracket(step) -> str:
        feats = ",".join(f"{k}={v:g}" for k, v in sorted(step.features.items()))
        inner = " ".join(bracket(child) for child in step.children)
        body = f"{_rule_repr(step.rule)} @ {step.covered!r}"
        if feats:
            body += f" [{feats}]"
        return f"({body} {inner})" if inner else f"({body})"

    return " ".join(bracket(t) for t in derivation.trees)


def cmd_translate(args) -> int:
    config = load_config(args.config) if args.config else {}
    for key in config:
        if key not in CONFIG_KEYS and key not in SNRG_FEATURES and key not in SEG_FEATURES:
            raise SystemExit(f"unknown config key {key!r}")

    decoder = args.decoder or config.get("decoder", "snrg-chart")
    if decoder not in DECODERS:
        raise SystemExit(f"unknown decoder {decoder!r}")
    kind = args.kind or config.get("kind", "dbg")
    if kind not in GRAPH_KINDS:
        raise SystemExit(f"unknown graph kind {kind!r}")

    names = SEG_FEATURES if decoder == "seg" else SNRG_FEATURES
    weight_config = {
        k: float(v) for k, v in config.items() if k in names
    }
    try:
        weights = Weights.for_decoder(names, weight_config)
    except WeightsError as exc:
        raise SystemExit(str(exc))
    weights.update(parse_weight_flags(args.weight, names))

    def setting(flag_value, key, default, cast=int):
        if flag_value is not None:
            return flag_value
        if key in config:
            return cast(config[key])
        return default

    cfg = {
        "decoder": decoder,
        "kind": kind,
        "beam": setting(args.beam, "beam", 200),
        "d_max": setting(args.d_max, "d_max", 6),
        "l_max": setting(args.l_max, "l_max", 20),
        "span_max": setting(args.span_max, "span_max", 20),
        "g_max": setting(args.g_max, "g_max", 20),
        "kbest": setting(args.kbest, "kbest", 1),
        "oov": not args.no_oov,
        "dump": args.derivation,
        "feature_names": names,
    }
    for key in ("beam", "d_max", "l_max", "span_max", "g_max", "kbest"):
        if cfg[key] is not None and cfg[key] <= 0:
            raise SystemExit(f"{key} must be positive")

    with _open(args.table) as handle:
        table = read_table(handle)
    with _open(args.lm) as handle:
        lm = load_arpa(handle)

    stats = CorpusStats()
    with _open(args.input) as handle:
        trees = list(read_conll(handle, stats=stats))

    failed = 0
    if args.jobs > 1:
        with ProcessPoolExecutor(
            max_workers=args.jobs,
            initializer=_translate_init,
            initargs=(table, lm, weights, cfg),
        ) as pool:
            outputs = [
                payload for _, payload in sorted(
                    pool.map(_translate_one, enumerate(trees), chunksize=4)
                )
            ]
    else:
        outputs = [_decode_tree(t, table, lm, weights, cfg) for t in trees]

    for lines, dump in outputs:
        if lines is None:
            failed += 1
            print("")
            log.error("sentence failed: %s", dump)
            continue
        for line in lines:
            print(line)
        if dump:
            print(dump, file=sys.stderr)
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# bleu
# ---------------------------------------------------------------------------


def cmd_bleu(args) -> int:
    with _open(args.hypotheses) as handle:
        hyps = [line.split() for line in handle]
    reference_files = []
    for path in args.references:
        with _open(path) as handle:
            reference_files.append([line.split() for line in handle])
    for path, refs in zip(args.references, reference_files):
        if len(refs) != len(hyps):
            raise SystemExit(
                f"{path}: {len(refs)} sentences, hypotheses have {len(hyps)}"
            )
    grouped = [list(rows) for rows in zip(*reference_files)]
    score = bleu_mod.corpus_bleu(hyps, grouped, smooth=args.smooth)
    print(f"BLEU = {score:.2f}")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphmt",
        description="graph-to-string translation toolkit",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("graph", help="build and print sentence graphs")
    p.add_argument("input", help="dependency trees in CoNLL format")
    p.add_argument("--kind", choices=GRAPH_KINDS, default="dbg")
    p.add_argument("--dot", action="store_true", help="emit graphviz blocks")
    p.add_argument("--labels", action="store_true", help="show edge labels")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("extract", help="extract a rule table from bitext")
    p.add_argument("--source", required=True, help="source trees (CoNLL)")
    p.add_argument("--target", required=True, help="target sentences, tokenized")
    p.add_argument("--align", required=True, help="word alignments, i-j per pair")
    p.add_argument("-o", "--output", required=True, help="rule table to write")
    p.add_argument("--kind", choices=GRAPH_KINDS, default="dbg")
    p.add_argument("--mode", choices=("spp", "snrg"), default="spp")
    p.add_argument("--max-len", type=int, default=7, help="flat pair length cap")
    p.add_argument("--init-len", type=int, default=10)
    p.add_argument("--max-symbols", type=int, default=5)
    p.add_argument("--max-nts", type=int, default=2)
    p.add_argument("--mgs", type=int, choices=(1, 2), default=2,
                   help="minimum source words a non-terminal may cover")
    p.add_argument("--pos-nt", action="store_true",
                   help="tag-based non-terminal symbols on the source side")
    p.add_argument("--labels", action="store_true",
                   help="distinguish edge relation types in rules")
    p.add_argument("--top-n", type=int, default=30)
    p.add_argument("--lexicon", help="prefix for word translation tables")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("translate", help="decode graphs into target strings")
    p.add_argument("input", help="dependency trees in CoNLL format")
    p.add_argument("--table", required=True)
    p.add_argument("--lm", required=True, help="backoff model file")
    p.add_argument("--decoder", choices=DECODERS)
    p.add_argument("--kind", choices=GRAPH_KINDS)
    p.add_argument("--config", help="key = value settings file")
    p.add_argument("--weight", action="append", metavar="NAME:VALUE")
    p.add_argument("--beam", type=int)
    p.add_argument("--d-max", dest="d_max", type=int)
    p.add_argument("--l-max", dest="l_max", type=int)
    p.add_argument("--span-max", dest="span_max", type=int)
    p.add_argument("--g-max", dest="g_max", type=int)
    p.add_argument("--kbest", type=int)
    p.add_argument("--derivation", action="store_true",
                   help="dump derivations to stderr")
    p.add_argument("--no-oov", action="store_true",
                   help="fail sentences with uncoverable words")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("bleu", help="score hypotheses against references")
    p.add_argument("hypotheses")
    p.add_argument("references", nargs="+")
    p.add_argument("--smooth", action="store_true", help="add-one smoothing")
    p.set_defaults(func=cmd_bleu)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
