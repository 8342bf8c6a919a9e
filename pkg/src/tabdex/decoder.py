"""Constrained autoregressive decoding of tabids.

Search generates a tabid token by token. A trie of currently valid tabids
restricts every step to tokens that can still complete a real identifier,
so the decoder cannot emit garbage no matter what the scorer says. The
scorer interface is pluggable; the reference implementation routes by
embedding distance down the clustering tree (internal levels) and to
per-table synthetic-query centroids (leaf positions).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping, Protocol, Sequence, runtime_checkable

import numpy as np

from .embedding import Embedder, dist
from .errors import DuplicateTableError
from .tree import SemanticTree, TabId

DEFAULT_BEAM = 20
DEFAULT_TAU = 0.2


class TrieNode:
    __slots__ = ("children", "table_id")

    def __init__(self) -> None:
        self.children: dict[int, TrieNode] = {}
        self.table_id: str | None = None


class TabIdTrie:
    """Nested token map whose terminals carry table ids."""

    def __init__(self) -> None:
        self.root = TrieNode()
        self._count = 0

    def __len__(self) -> int:
        return self._count

    def insert(self, tabid: Sequence[int], table_id: str) -> None:
        node = self.root
        for token in tabid:
            node = node.children.setdefault(token, TrieNode())
        if node.table_id is not None:
            raise DuplicateTableError(f"tabid {tuple(tabid)} already present")
        node.table_id = table_id
        self._count += 1

    def delete(self, tabid: Sequence[int]) -> None:
        chain: list[tuple[TrieNode, int]] = []
        node = self.root
        for token in tabid:
            if token not in node.children:
                raise KeyError(f"tabid {tuple(tabid)} not in trie")
            chain.append((node, token))
            node = node.children[token]
        if node.table_id is None:
            raise KeyError(f"tabid {tuple(tabid)} not in trie")
        node.table_id = None
        self._count -= 1
        # prune any branch left with neither terminals nor children
        for parent, token in reversed(chain):
            child = parent.children[token]
            if child.children or child.table_id is not None:
                break
            del parent.children[token]

    def node(self, prefix: Sequence[int]) -> TrieNode:
        node = self.root
        for token in prefix:
            if token not in node.children:
                raise KeyError(f"prefix {tuple(prefix)} not in trie")
            node = node.children[token]
        return node

    def lookup(self, tabid: Sequence[int]) -> str | None:
        try:
            return self.node(tabid).table_id
        except KeyError:
            return None

    def items(self):
        """All (tabid, table_id) pairs in lexicographic tabid order."""

        def walk(node: TrieNode, prefix: TabId):
            if node.table_id is not None:
                yield prefix, node.table_id
            for token in sorted(node.children):
                yield from walk(node.children[token], prefix + (token,))

        yield from walk(self.root, ())


def trie_from(tabid_map: Mapping[str, TabId]) -> TabIdTrie:
    trie = TabIdTrie()
    for table_id, tabid in tabid_map.items():
        trie.insert(tabid, table_id)
    return trie


@runtime_checkable
class AutoregressiveScorer(Protocol):
    def encode_query(self, query: str) -> Any: ...

    def next_token_dist(
        self, query_repr: Any, prefix: TabId, allowed: tuple[int, ...]
    ) -> dict[int, float]: ...


@dataclass(frozen=True)
class ScoredTabId:
    tabid: TabId
    log_prob: float
    table_id: str


def beam_search(
    query: str,
    scorer: AutoregressiveScorer,
    trie: TabIdTrie,
    beam: int = DEFAULT_BEAM,
    k: int = 10,
) -> list[ScoredTabId]:
    """Length-synchronous beam search over the trie.

    Hypotheses start at the (implicit) begin token and extend only over
    tokens the trie allows after their prefix. Hypotheses reaching a
    terminal join a finished pool; up to K finished results come back
    sorted by descending log_prob, ties by lexicographic tabid. No length
    normalization is applied.
    """
    if beam < 1 or k < 1:
        raise ValueError("beam and k must be >= 1")
    if not trie.root.children:
        return []
    query_repr = scorer.encode_query(query)
    finished: list[ScoredTabId] = []
    active: list[tuple[TabId, float, TrieNode]] = [((), 0.0, trie.root)]
    while active:
        expansions: list[tuple[TabId, float, TrieNode]] = []
        for prefix, log_prob, node in active:
            allowed = tuple(sorted(node.children))
            probs = scorer.next_token_dist(query_repr, prefix, allowed)
            for token in allowed:
                p = probs.get(token, 0.0)
                step = math.log(p) if p > 0.0 else -math.inf
                child = node.children[token]
                extended = prefix + (token,)
                total = log_prob + step
                if child.table_id is not None:
                    finished.append(ScoredTabId(extended, total, child.table_id))
                if child.children:
                    expansions.append((extended, total, child))
        expansions.sort(key=lambda e: (-e[1], e[0]))
        active = expansions[:beam]
    finished.sort(key=lambda s: (-s.log_prob, s.tabid))
    return finished[:k]


def search(
    query: str,
    scorer: AutoregressiveScorer,
    trie: TabIdTrie,
    k: int = 10,
    beam: int = DEFAULT_BEAM,
) -> list[tuple[str, float]]:
    """Ranked (table_id, log_prob) pairs for a query."""
    return [(s.table_id, s.log_prob) for s in beam_search(query, scorer, trie, beam=beam, k=k)]


# ---------------------------------------------------------------------------
# reference scorer: route by distance in the clustering tree


def _softmax_over(qv: np.ndarray, vectors: list[np.ndarray], tau: float) -> np.ndarray:
    scores = np.array([-dist(qv, v) / tau for v in vectors])
    scores -= scores.max()
    exp = np.exp(scores)
    return exp / exp.sum()


def query_centroids(
    pool: Mapping[str, Sequence], embedder: Embedder
) -> dict[str, np.ndarray]:
    """Mean embedding of each table's synthetic queries.

    Accepts SyntheticQuery lists or plain strings. Tables with no queries
    get a zero centroid.
    """
    dim = embedder.config.dim
    centroids = {}
    for table_id, queries in pool.items():
        texts = [q if isinstance(q, str) else q.text for q in queries]
        if texts:
            centroids[table_id] = np.mean([embedder.embed(t) for t in texts], axis=0)
        else:
            centroids[table_id] = np.zeros(dim)
    return centroids


class TreeDescentScorer:
    """Scores tokens by embedding distance against the live tree.

    Internal prefixes: softmax(-dist(query, child center)/tau) over the
    allowed child ordinals, in the view those children were clustered
    under. Leaf positions: same, against the centroid of each candidate
    table's synthetic queries. The reference embedder gives a query the
    same vector under either view, so a single embedding serves both.
    """

    def __init__(
        self,
        tree: SemanticTree,
        embedder: Embedder,
        centroids: Mapping[str, np.ndarray],
        tau: float = DEFAULT_TAU,
    ):
        self.tree = tree
        self.embedder = embedder
        self.centroids = centroids
        self.tau = tau
        self._zero = np.zeros(embedder.config.dim)

    def encode_query(self, query: str) -> np.ndarray:
        return self.embedder.embed(query)

    def next_token_dist(
        self, query_repr: np.ndarray, prefix: TabId, allowed: tuple[int, ...]
    ) -> dict[int, float]:
        if not allowed:
            return {}
        node = self.tree.node_at(prefix)
        if node.is_leaf:
            by_position = node.position_map()
            vectors = [self.centroids.get(by_position[t], self._zero) for t in allowed]
        else:
            assert node.children is not None
            vectors = [node.children[t].center for t in allowed]
        probs = _softmax_over(query_repr, vectors, self.tau)
        return {t: float(p) for t, p in zip(allowed, probs)}


def tree_descent_scorer(
    tree: SemanticTree,
    embedder: Embedder,
    pool: Mapping[str, Sequence],
    tau: float = DEFAULT_TAU,
) -> TreeDescentScorer:
    return TreeDescentScorer(tree, embedder, query_centroids(pool, embedder), tau)


# ---------------------------------------------------------------------------
# frozen routing: a self-contained snapshot of the vectors a trie needs


def build_routing(
    tree: SemanticTree, trie: TabIdTrie, centroids: Mapping[str, np.ndarray]
) -> dict[TabId, dict[int, np.ndarray]]:
    """Copy out, per trie prefix, the vector behind each allowed token.

    Sealing a unit with this table makes its scoring independent of later
    mutations of the shared tree.
    """
    dim = len(tree.root.center)
    zero = np.zeros(dim)
    routing: dict[TabId, dict[int, np.ndarray]] = {}

    def walk(trie_node: TrieNode, prefix: TabId) -> None:
        if not trie_node.children:
            return
        node = tree.node_at(prefix)
        entry: dict[int, np.ndarray] = {}
        if node.is_leaf:
            by_position = node.position_map()
            for token in trie_node.children:
                entry[token] = np.array(centroids.get(by_position[token], zero), copy=True)
        else:
            assert node.children is not None
            for token in trie_node.children:
                entry[token] = np.array(node.children[token].center, copy=True)
        routing[prefix] = entry
        for token, child in trie_node.children.items():
            walk(child, prefix + (token,))

    walk(trie.root, ())
    return routing


class FrozenScorer:
    """Same scoring rule as TreeDescentScorer, over a routing snapshot."""

    def __init__(
        self,
        routing: Mapping[TabId, Mapping[int, np.ndarray]],
        embedder: Embedder,
        tau: float = DEFAULT_TAU,
    ):
        self.routing = routing
        self.embedder = embedder
        self.tau = tau

    def encode_query(self, query: str) -> np.ndarray:
        return self.embedder.embed(query)

    def next_token_dist(
        self, query_repr: np.ndarray, prefix: TabId, allowed: tuple[int, ...]
    ) -> dict[int, float]:
        if not allowed:
            return {}
        entry = self.routing[prefix]
        probs = _softmax_over(query_repr, [entry[t] for t in allowed], self.tau)
        return {t: float(p) for t, p in zip(allowed, probs)}
