"""Shared fixtures: the running-example sentence, random generators, LMs."""

from __future__ import annotations

import io
import random

import pytest
from hypothesis import settings

from graphmt.corpus import AlignedPair
from graphmt.graph import DepGraph, Subsequence, build_dbg, build_dsg
from graphmt.lm import NgramLM, write_arpa, load_arpa

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


ZH_TOKENS = [
    ("2010nian", "NT"),
    ("FIFA", "NT"),
    ("shijiebei", "NR"),
    ("zai", "P"),
    ("Nanfei", "NR"),
    ("chenggong", "AD"),
    ("juxing", "VV"),
]
ZH_DEP_EDGES = [(3, 1), (3, 2), (7, 3), (7, 4), (7, 6), (4, 5)]

EN_TARGET = (
    "2010",
    "FIFA",
    "World",
    "Cup",
    "was",
    "held",
    "successfully",
    "in",
    "South",
    "Africa",
)

# zai -> in, Nanfei -> South Africa, chenggong -> successfully,
# juxing -> was held, the rest one-to-one.
ZH_EN_ALIGNMENT = frozenset(
    [(1, 1), (2, 2), (3, 3), (3, 4), (7, 5), (7, 6), (6, 7), (4, 8), (5, 9), (5, 10)]
)


@pytest.fixture
def zh_tree() -> DepGraph:
    return DepGraph(ZH_TOKENS, ZH_DEP_EDGES)


@pytest.fixture
def zh_dbg(zh_tree) -> DepGraph:
    return build_dbg(zh_tree)


@pytest.fixture
def zh_dsg(zh_tree) -> DepGraph:
    return build_dsg(zh_tree)


@pytest.fixture
def zh_en_pair(zh_dbg) -> AlignedPair:
    return AlignedPair(zh_dbg, EN_TARGET, ZH_EN_ALIGNMENT)


def random_tree(rng: random.Random, n: int, vocab=None, tags=None) -> DepGraph:
    """Random labeled dependency tree over n positions."""
    order = list(range(1, n + 1))
    rng.shuffle(order)
    edges = []
    for idx in range(1, n):
        head = order[rng.randrange(idx)]
        edges.append((head, order[idx]))
    vocab = vocab or [f"w{i}" for i in range(1, 13)]
    tags = tags or ["N", "V", "P", "A"]
    tokens = [(rng.choice(vocab), rng.choice(tags)) for _ in range(n)]
    return DepGraph(tokens, edges)


def random_graph(rng: random.Random, n: int, extra_edges: int = 2) -> DepGraph:
    """Random connected graph: a tree plus a few random directed edges."""
    tree = random_tree(rng, n)
    edges = [(h, d, label) for (h, d), label in tree.edges.items()]
    for _ in range(extra_edges):
        h, d = rng.sample(range(1, n + 1), 2) if n > 1 else (1, 1)
        if h != d:
            edges.append((h, d, rng.choice(["dependency", "sequential"])))
    return DepGraph(tree.tokens(), edges)


def random_pair(
    rng: random.Random,
    graph_kind: str = "dbg",
    max_src: int = 8,
    max_tgt: int = 8,
    link_prob: float = 0.35,
) -> AlignedPair:
    n = rng.randint(2, max_src)
    m = rng.randint(2, max_tgt)
    tree = random_tree(rng, n, vocab=[f"s{i}" for i in range(1, 10)])
    g = build_dbg(tree) if graph_kind == "dbg" else build_dsg(tree)
    target = tuple(rng.choice([f"t{i}" for i in range(1, 10)]) for _ in range(m))
    links = set()
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if rng.random() < link_prob / max(1, (n * m) ** 0.5 / 2):
                links.add((i, j))
    if not links:
        links.add((rng.randint(1, n), rng.randint(1, m)))
    return AlignedPair(g, target, frozenset(links))


def make_lm(entries: dict, order: int) -> NgramLM:
    """Build an NgramLM by writing and re-reading the text format."""
    buf = io.StringIO()
    write_arpa(order, entries, buf)
    buf.seek(0)
    return load_arpa(buf)


def uniform_unigram_entries(vocab, logp: float = -1.0) -> dict:
    entries = {("<s>",): (-99.0, 0.0), ("</s>",): (logp, 0.0), ("<unk>",): (logp, 0.0)}
    for w in vocab:
        entries[(w,)] = (logp, 0.0)
    return entries


def random_lm_entries(rng: random.Random, vocab, order: int) -> dict:
    """Random backoff model entries; not normalized, fine for scoring tests."""
    words = list(vocab) + ["<s>", "</s>"]
    entries = {("<unk>",): (round(rng.uniform(-3, -1), 4), 0.0)}
    for w in words:
        entries[(w,)] = (
            round(rng.uniform(-2.5, -0.3), 4),
            round(rng.uniform(-0.8, 0.0), 4),
        )
    for n in range(2, order + 1):
        for _ in range(len(words) * 3):
            gram = tuple(rng.choice(words) for _ in range(n))
            backoff = round(rng.uniform(-0.5, 0.0), 4) if n < order else 0.0
            entries[gram] = (round(rng.uniform(-2.0, -0.1), 4), backoff)
    return entries
