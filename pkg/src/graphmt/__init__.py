"""Graph-to-string statistical machine translation toolkit."""

__version__ = "0.1.0"

from .graph import (
    DepGraph,
    GraphFragment,
    NonTerminal,
    Subsequence,
    Terminal,
    build_dbg,
    build_dsg,
    canonical_key,
    collapse,
    enumerate_connected_subsequences,
    induced_subgraph,
    join,
    nt_position,
)

__all__ = [
    "DepGraph",
    "GraphFragment",
    "NonTerminal",
    "Subsequence",
    "Terminal",
    "build_dbg",
    "build_dsg",
    "canonical_key",
    "collapse",
    "enumerate_connected_subsequences",
    "induced_subgraph",
    "join",
    "nt_position",
]
