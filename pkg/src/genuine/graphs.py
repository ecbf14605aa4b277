"""Token graphs over generated text.

Two constructions: dependency trees (one node per word, undirected edges
between each word and its governor) and next-token chains (edges between
adjacent words). Sentence graphs merge into one document graph by chaining
the sentence roots in order, so information can flow across sentences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import CorpusError, SentenceParse

DPT = "dpt"
NTG = "ntg"


@dataclass(frozen=True)
class NodeMeta:
    token_index: int     # document-wide 0-based token position
    sentence_index: int
    depth: int           # tree distance from the sentence root


@dataclass
class DocumentGraph:
    n: int
    adjacency: np.ndarray          # n x n symmetric 0/1, zero diagonal
    node_meta: list[NodeMeta]
    roots: list[int]               # one per sentence
    kind: str

    def edge_count(self) -> int:
        return int(self.adjacency.sum()) // 2


def _depths_from_root(n: int, edges: list[tuple[int, int]], root: int) -> list[int]:
    neighbors = [[] for _ in range(n)]
    for u, v in edges:
        neighbors[u].append(v)
        neighbors[v].append(u)
    depth = [-1] * n
    depth[root] = 0
    frontier = [root]
    while frontier:
        nxt = []
        for u in frontier:
            for v in neighbors[u]:
                if depth[v] < 0:
                    depth[v] = depth[u] + 1
                    nxt.append(v)
        frontier = nxt
    if any(d < 0 for d in depth):
        raise CorpusError("disconnected sentence graph")
    return depth


def _graph_from_edges(n, edges, root, kind) -> DocumentGraph:
    adjacency = np.zeros((n, n))
    for u, v in edges:
        adjacency[u, v] = 1.0
        adjacency[v, u] = 1.0
    depths = _depths_from_root(n, edges, root)
    meta = [NodeMeta(token_index=i, sentence_index=0, depth=depths[i]) for i in range(n)]
    return DocumentGraph(n=n, adjacency=adjacency, node_meta=meta, roots=[root], kind=kind)


def build_dpt(sentence: SentenceParse) -> DocumentGraph:
    """Undirected dependency tree for one sentence."""
    n = len(sentence.tokens)
    edges = []
    root = None
    for tok in sentence.tokens:
        if tok.head == 0:
            root = tok.index - 1
        else:
            edges.append((tok.index - 1, tok.head - 1))
    if root is None:
        raise CorpusError("sentence has no root token")
    return _graph_from_edges(n, edges, root, DPT)


def build_ntg(token_count: int) -> DocumentGraph:
    """Path graph over token order; the first token acts as root for merging."""
    if token_count < 1:
        raise CorpusError(f"token_count must be >= 1, got {token_count}")
    edges = [(i, i + 1) for i in range(token_count - 1)]
    return _graph_from_edges(token_count, edges, 0, NTG)


def merge_document(trees: list[DocumentGraph], link: str = "chain") -> DocumentGraph:
    """Join sentence graphs into one document graph via their roots.

    Default links consecutive sentence roots in a chain; "clique" connects
    every pair of roots.
    """
    if not trees:
        raise CorpusError("merge_document needs at least one sentence graph")
    if link not in ("chain", "clique"):
        raise CorpusError(f"unknown root link mode {link!r}")
    if len(trees) == 1:
        g = trees[0]
        return DocumentGraph(g.n, g.adjacency.copy(), list(g.node_meta), list(g.roots), g.kind)
    total = sum(g.n for g in trees)
    adjacency = np.zeros((total, total))
    meta: list[NodeMeta] = []
    roots = []
    offset = 0
    for s_idx, g in enumerate(trees):
        adjacency[offset:offset + g.n, offset:offset + g.n] = g.adjacency
        for m in g.node_meta:
            meta.append(NodeMeta(token_index=offset + m.token_index,
                                 sentence_index=s_idx, depth=m.depth))
        roots.append(offset + g.roots[0])
        offset += g.n
    if link == "chain":
        pairs = zip(roots, roots[1:])
    else:
        pairs = ((roots[i], roots[j]) for i in range(len(roots)) for j in range(i + 1, len(roots)))
    for u, v in pairs:
        adjacency[u, v] = 1.0
        adjacency[v, u] = 1.0
    return DocumentGraph(n=total, adjacency=adjacency, node_meta=meta, roots=roots,
                         kind=trees[0].kind)


def document_graph(record, kind: str = DPT) -> DocumentGraph:
    """Build the merged document graph for a record."""
    if kind == DPT:
        parts = [build_dpt(s) for s in record.sentences]
    elif kind == NTG:
        parts = [build_ntg(len(s.tokens)) for s in record.sentences]
    else:
        raise CorpusError(f"unknown graph kind {kind!r}")
    return merge_document(parts)


def normalize(adjacency: np.ndarray) -> np.ndarray:
    """Self-loop symmetric normalization D^{-1/2} (A + I) D^{-1/2}."""
    a = np.asarray(adjacency, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise CorpusError(f"adjacency must be square, got {a.shape}")
    b = a + np.eye(n)
    inv = 1.0 / np.sqrt(b.sum(axis=1))
    return b * np.outer(inv, inv)


def density(graph: DocumentGraph) -> float:
    """Undirected simple-graph edge density; 0 for graphs of at most one node."""
    if graph.n <= 1:
        return 0.0
    return 2.0 * graph.edge_count() / (graph.n * (graph.n - 1))


def to_edge_list(graph: DocumentGraph) -> str:
    """Debug export: one '(u, v)' pair per line, 0-based, u < v."""
    lines = []
    for u in range(graph.n):
        for v in range(u + 1, graph.n):
            if graph.adjacency[u, v] != 0:
                lines.append(f"{u} {v}")
    return "\n".join(lines) + ("\n" if lines else "")
