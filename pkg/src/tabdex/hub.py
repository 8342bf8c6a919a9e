"""A hub of sealed per-batch sub-indexes over one shared clustering tree.

The base batch and every later arrival batch each get their own memory
unit: a trie of just that batch's tabids, a frozen routing snapshot taken
at seal time, and the batch's synthetic-query pool. Because a sealed unit
never reads the live tree again, its answers can never drift when later
batches are inserted; that is the whole point. A query fans out to every
unit and a mapping rule then picks exactly one unit's candidate list by
voting over nearest synthetic queries.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .decoder import (
    DEFAULT_BEAM,
    DEFAULT_TAU,
    FrozenScorer,
    TabIdTrie,
    beam_search,
    build_routing,
    query_centroids,
)
from .embedding import Embedder, embed_table
from .errors import DuplicateTableError, UnknownTableError
from .incremental import insert_table
from .querygen import (
    QueryGenConfig,
    QueryGenerator,
    SyntheticQuery,
    TemplateQueryGenerator,
    build_query_pool,
)
from .tables import Repository
from .tree import ClusteringConfig, SemanticTree, TabId, build_tree

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CandidateList:
    unit_id: int
    entries: tuple[tuple[str, float], ...]  # (table_id, log_prob), ranked


EMPTY_CANDIDATES = CandidateList(unit_id=-1, entries=())


@dataclass
class MemoryUnit:
    """One sealed batch: its tabids, routing snapshot, and query pool."""

    batch_id: int
    trie: TabIdTrie
    routing: dict[TabId, dict[int, np.ndarray]]
    pool: dict[str, list[str]]  # table_id -> query texts
    tau: float
    sealed: bool = False
    pool_vectors: dict[str, np.ndarray] = field(default_factory=dict)  # (m, dim) per table

    def table_ids(self) -> set[str]:
        return {table_id for _, table_id in self.trie.items()}

    def search(self, query: str, embedder: Embedder, k: int, beam: int) -> CandidateList:
        scorer = FrozenScorer(self.routing, embedder, self.tau)
        results = beam_search(query, scorer, self.trie, beam=beam, k=k)
        return CandidateList(
            unit_id=self.batch_id,
            entries=tuple((s.table_id, s.log_prob) for s in results),
        )


def _embed_pool(pool: dict[str, list[SyntheticQuery]], embedder: Embedder):
    """Per-table text lists plus stacked query-embedding matrices."""
    texts = {tid: [q.text for q in queries] for tid, queries in pool.items()}
    vectors = {
        tid: np.stack([embedder.embed(t) for t in batch]) if batch else np.zeros((0, embedder.config.dim))
        for tid, batch in texts.items()
    }
    return texts, vectors


class MemoryHub:
    def __init__(
        self,
        tree: SemanticTree,
        embedder: Embedder,
        querygen: QueryGenConfig,
        generator: QueryGenerator | None = None,
        tau: float = DEFAULT_TAU,
        mapping_seed: int = 0,
        prioritize_new: bool = False,
    ):
        self.tree = tree
        self.embedder = embedder
        self.querygen = querygen
        self.generator = generator or TemplateQueryGenerator(querygen.seed)
        self.tau = tau
        self.mapping_seed = mapping_seed
        self.prioritize_new = prioritize_new
        self.units: list[MemoryUnit] = []
        self._writer_lock = threading.RLock()

    # how many of the n_q nearest pool queries vote; fixed fraction of B
    @property
    def n_q(self) -> int:
        return max(1, self.querygen.B // 4)

    @classmethod
    def build(
        cls,
        repo: Repository,
        clustering: ClusteringConfig,
        embedder: Embedder,
        querygen: QueryGenConfig,
        generator: QueryGenerator | None = None,
        pool: dict[str, list[SyntheticQuery]] | None = None,
        tau: float = DEFAULT_TAU,
        mapping_seed: int = 0,
        prioritize_new: bool = False,
    ) -> "MemoryHub":
        """Index the base repository and seal it as the first unit."""
        embeddings = {t.id: embed_table(t, embedder) for t in repo}
        tree = build_tree(repo, embeddings, clustering)
        hub = cls(
            tree,
            embedder,
            querygen,
            generator=generator,
            tau=tau,
            mapping_seed=mapping_seed,
            prioritize_new=prioritize_new,
        )
        if pool is None:
            pool = build_query_pool(repo, hub.generator, querygen)
        hub._seal_unit(batch_id=repo.batch_id, tabids=dict(tree.tabid_map), pool=pool)
        return hub

    def _seal_unit(
        self,
        batch_id: int,
        tabids: dict[str, TabId],
        pool: dict[str, list[SyntheticQuery]],
    ) -> MemoryUnit:
        trie = TabIdTrie()
        for table_id, tabid in tabids.items():
            trie.insert(tabid, table_id)
        texts, vectors = _embed_pool(pool, self.embedder)
        centroids = {
            tid: (mat.mean(axis=0) if len(mat) else np.zeros(self.embedder.config.dim))
            for tid, mat in vectors.items()
        }
        unit = MemoryUnit(
            batch_id=batch_id,
            trie=trie,
            routing=build_routing(self.tree, trie, centroids),
            pool=texts,
            tau=self.tau,
            sealed=True,
            pool_vectors=vectors,
        )
        self.units.append(unit)
        return unit

    def unit_for_batch(self, batch_id: int) -> MemoryUnit:
        for unit in self.units:
            if unit.batch_id == batch_id:
                return unit
        raise KeyError(f"no unit for batch {batch_id}")

    def table_count(self) -> int:
        return len(self.tree.tabid_map)

    def update(
        self, batch: Repository, pool: dict[str, list[SyntheticQuery]] | None = None
    ) -> MemoryUnit:
        """Insert an arrival batch and seal it as a new unit.

        Old units are untouched by construction; only the shared tree
        gains members (and possibly new sibling clusters).
        """
        with self._writer_lock:
            if not self.units:
                raise ValueError("hub has no sealed base unit; build it first")
            if any(u.batch_id == batch.batch_id for u in self.units):
                raise ValueError(f"batch id {batch.batch_id} already has a unit")
            for t in batch:
                if t.id in self.tree.tabid_map:
                    raise DuplicateTableError(f"table id {t.id!r} already indexed")
            tabids: dict[str, TabId] = {}
            for t in batch:
                outcome = insert_table(self.tree, t, embed_table(t, self.embedder))
                tabids[t.id] = outcome.tabid
            if pool is None:
                pool = build_query_pool(batch, self.generator, self.querygen)
            return self._seal_unit(batch_id=batch.batch_id, tabids=tabids, pool=pool)

    def delete(self, table_id: str) -> None:
        """Retire a table from the shared map and its owning unit's trie."""
        with self._writer_lock:
            if table_id not in self.tree.tabid_map:
                raise UnknownTableError(f"table id {table_id!r} not in index")
            tabid = self.tree.tabid_map.pop(table_id)
            for unit in self.units:
                if unit.trie.lookup(tabid) == table_id:
                    unit.trie.delete(tabid)
                    unit.pool.pop(table_id, None)
                    unit.pool_vectors.pop(table_id, None)
                    return
            raise UnknownTableError(f"table id {table_id!r} missing from all units")

    # ------------------------------------------------------------------
    # search

    def fanout_search(
        self, query: str, k: int, beam: int = DEFAULT_BEAM, parallel: bool = False
    ) -> list[CandidateList]:
        """One CandidateList per unit, ordered by batch id.

        Units are sealed and immutable, so the parallel mode needs no
        locking and must agree bit for bit with the serial mode.
        """
        if not self.units:
            raise ValueError("hub has no units")
        units = sorted(self.units, key=lambda u: u.batch_id)
        if parallel and len(units) > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=len(units)) as pool:
                return list(pool.map(lambda u: u.search(query, self.embedder, k, beam), units))
        return [u.search(query, self.embedder, k, beam) for u in units]

    def query_mapping(
        self,
        query: str,
        candidates: Sequence[CandidateList],
        prioritize_new: bool | None = None,
        new_batch_id: int | None = None,
    ) -> CandidateList:
        """Pick one unit's list by voting over nearest synthetic queries.

        Each unit contributes the synthetic queries of its own candidates;
        of the pooled queries, the n_q nearest to the user query (Euclidean
        on the shared embedder) vote for their unit. Ties are broken by a
        seeded draw. With prioritization on, an old-batch winner yields to
        a new-batch runner-up.
        """
        if prioritize_new is None:
            prioritize_new = self.prioritize_new
        non_empty = [cl for cl in candidates if cl.entries]
        if not non_empty:
            return EMPTY_CANDIDATES
        qv = self.embedder.embed(query)
        votes: list[tuple[float, int, str, int]] = []  # (distance, unit, table, query idx)
        for cl in non_empty:
            unit = self.unit_for_batch(cl.unit_id)
            for table_id, _ in cl.entries:
                mat = unit.pool_vectors.get(table_id)
                if mat is None or not len(mat):
                    continue
                dists = np.linalg.norm(mat - qv, axis=1)
                votes.extend(
                    (float(d), cl.unit_id, table_id, qi) for qi, d in enumerate(dists)
                )
        if not votes:
            log.warning(
                "query mapping fallback: no candidate has pool queries; "
                "selecting unit by rank-1 log_prob"
            )
            best = max(non_empty, key=lambda cl: cl.entries[0][1])
            return best
        votes.sort()
        counts: dict[int, int] = {}
        for _, unit_id, _, _ in votes[: self.n_q]:
            counts[unit_id] = counts.get(unit_id, 0) + 1
        rng = np.random.default_rng(
            np.random.SeedSequence([self.mapping_seed % 2**63, _query_salt(query)])
        )
        jitter = {unit_id: rng.random() for unit_id in sorted(counts)}
        ranked = sorted(counts, key=lambda u: (-counts[u], jitter[u]))
        winner = ranked[0]
        if prioritize_new and len(ranked) > 1:
            if new_batch_id is None:
                new_batch_id = max(u.batch_id for u in self.units)
            runner_up = ranked[1]
            if winner != new_batch_id and runner_up == new_batch_id:
                winner = runner_up
        for cl in non_empty:
            if cl.unit_id == winner:
                return cl
        return EMPTY_CANDIDATES  # unreachable: winner counted from non_empty

    def search(
        self,
        query: str,
        k: int,
        beam: int = DEFAULT_BEAM,
        parallel: bool = False,
        prioritize_new: bool | None = None,
        new_batch_id: int | None = None,
    ) -> CandidateList:
        candidates = self.fanout_search(query, k, beam=beam, parallel=parallel)
        return self.query_mapping(
            query, candidates, prioritize_new=prioritize_new, new_batch_id=new_batch_id
        )


def _query_salt(query: str) -> int:
    import hashlib

    return int.from_bytes(
        hashlib.blake2b(query.encode("utf-8"), digest_size=8).digest(), "little"
    )
