"""Precision and continual-indexing metrics, plus the dynamic scenario.

The scenario splits a repository into a base portion and successive
arrival batches, indexes them one by one, and measures precision on
held-out synthetic queries after every stage: P[u][w] is precision on
batch w's queries once batch u has been indexed. From that triangle come
the continual metrics: pooled precision (AP), forgetting (FT), and
learning performance (LP).

Metric arithmetic is plain Python (sum / max / division) so exact rational
inputs stay exact; nothing here needs numpy.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .decoder import DEFAULT_TAU
from .embedding import Embedder
from .hub import MemoryHub
from .querygen import (
    QueryGenConfig,
    QueryGenerator,
    SyntheticQuery,
    TemplateQueryGenerator,
    build_query_pool,
)
from .tables import Repository
from .tree import ClusteringConfig


@dataclass(frozen=True)
class EvalQuery:
    text: str
    ground_truth_table_id: str


def precision_at_k(results: Sequence[str], truth: str, k: int) -> int:
    """1 if the truth appears in the first k ranked ids, else 0."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return 1 if truth in list(results)[:k] else 0


def mean_precision(hits: Sequence) -> float:
    """Mean of per-query indicators."""
    hits = list(hits)
    if not hits:
        raise ValueError("no queries to average")
    return sum(hits) / len(hits)


def average_performance(hit_groups: Sequence[Sequence]) -> float:
    """Precision pooled over several test sets (one flat mean, not a mean of means)."""
    pooled = [h for group in hit_groups for h in group]
    return mean_precision(pooled)


class PMatrix:
    """Lower-triangular precision entries P[u][w], defined only for w <= u."""

    def __init__(self, stages: int):
        if stages < 1:
            raise ValueError("stages must be >= 1")
        self.stages = stages
        self._values: dict[tuple[int, int], object] = {}

    def _check(self, u: int, w: int) -> None:
        if not 0 <= w <= u < self.stages:
            raise ValueError(f"P[{u}][{w}] outside the triangle (stages={self.stages})")

    def set(self, u: int, w: int, value) -> None:
        self._check(u, w)
        self._values[(u, w)] = value

    def get(self, u: int, w: int):
        self._check(u, w)
        return self._values[(u, w)]

    def rows(self) -> list[list]:
        return [[self.get(u, w) for w in range(u + 1)] for u in range(self.stages)]


def learning_performance(p: PMatrix, u: int):
    """Mean of the diagonal entries P[w][w] for w = 1..u."""
    if u < 1:
        raise ValueError("learning performance is undefined at u=0")
    return sum(p.get(w, w) for w in range(1, u + 1)) / u


def forgetting(p: PMatrix, u: int):
    """Mean over old batches of (best past precision - current precision).

    The inner max runs over w' from w to u-1: before batch w is indexed
    its precision is undefined, so earlier stages cannot participate.
    """
    if u < 1:
        raise ValueError("forgetting is undefined at u=0")
    total = None
    for w in range(u):
        best = max(p.get(wp, w) for wp in range(w, u))
        drop = best - p.get(u, w)
        total = drop if total is None else total + drop
    return total / u


# ---------------------------------------------------------------------------
# dynamic scenario


@dataclass
class ScenarioReport:
    splits: list[float]
    sizes: list[int]
    ks: list[int]
    test_sizes: list[int]
    pmatrix: dict[int, PMatrix]  # hub-level, through query mapping
    replay_pmatrix: dict[int, PMatrix]  # per-unit replay, mapping bypassed
    ap: dict[int, list[float]]
    ft: dict[int, list[float]]
    lp: dict[int, list[float]]
    replay_ft: dict[int, list[float]]
    timings: dict[str, float] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "splits": self.splits,
            "sizes": self.sizes,
            "ks": self.ks,
            "test_sizes": self.test_sizes,
            "pmatrix": {str(k): _triangle(self.pmatrix[k]) for k in self.ks},
            "replay_pmatrix": {str(k): _triangle(self.replay_pmatrix[k]) for k in self.ks},
            "ap": {str(k): self.ap[k] for k in self.ks},
            "ft": {str(k): self.ft[k] for k in self.ks},
            "lp": {str(k): self.lp[k] for k in self.ks},
            "replay_ft": {str(k): self.replay_ft[k] for k in self.ks},
            "timings": self.timings,
        }


def _triangle(p: PMatrix) -> list[list[float]]:
    return [[float(v) for v in row] for row in p.rows()]


def split_repository(repo: Repository, splits: Sequence[float], seed: int) -> list[Repository]:
    """Seeded shuffle, then consecutive slices of floor(N * fraction) tables."""
    if sum(splits) > 1.0 + 1e-9:
        raise ValueError("split fractions must sum to at most 1")
    n = len(repo)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    batches = []
    start = 0
    for batch_id, fraction in enumerate(splits):
        count = int(n * fraction)
        if count < 1 or start + count > n:
            raise ValueError(f"insufficient tables for split {batch_id} ({count} requested)")
        picked = [repo.tables[i] for i in order[start : start + count]]
        batches.append(Repository(tables=picked, batch_id=batch_id))
        start += count
    return batches


def hold_out_queries(
    pool: dict[str, list[SyntheticQuery]]
) -> tuple[dict[str, list[SyntheticQuery]], list[EvalQuery]]:
    """Reserve each table's last synthetic query for testing.

    The reserved query never enters the training pool, so evaluation is
    always on unseen text. Tables with fewer than two queries keep them
    all and are skipped for testing.
    """
    train: dict[str, list[SyntheticQuery]] = {}
    held: list[EvalQuery] = []
    for table_id, queries in pool.items():
        if len(queries) >= 2:
            train[table_id] = queries[:-1]
            held.append(EvalQuery(text=queries[-1].text, ground_truth_table_id=table_id))
        else:
            train[table_id] = queries
    return train, held


def run_dynamic_scenario(
    repo: Repository,
    clustering: ClusteringConfig,
    embedder: Embedder,
    querygen: QueryGenConfig,
    splits: Sequence[float] = (0.7, 0.1, 0.1, 0.1),
    seed: int = 0,
    ks: Sequence[int] = (1, 5),
    beam: int = 20,
    tau: float = DEFAULT_TAU,
    prioritize_new: bool = False,
    parallel: bool = False,
    generator: QueryGenerator | None = None,
    mapping_seed: int = 0,
) -> ScenarioReport:
    """Index batches one at a time and measure the full precision triangle."""
    ks = sorted(ks)
    k_max = ks[-1]
    gen = generator or TemplateQueryGenerator(querygen.seed)
    batches = split_repository(repo, splits, seed)
    stages = len(batches)
    timings: dict[str, float] = {}

    hub: MemoryHub | None = None
    tests: list[list[EvalQuery]] = []
    pmat = {k: PMatrix(stages) for k in ks}
    replay_pmat = {k: PMatrix(stages) for k in ks}
    hub_hits: dict[int, dict[tuple[int, int], list[int]]] = {k: {} for k in ks}

    for u, batch in enumerate(batches):
        t0 = time.perf_counter()
        pool = build_query_pool(batch, gen, querygen)
        train, held = hold_out_queries(pool)
        if u == 0:
            hub = MemoryHub.build(
                batch,
                clustering,
                embedder,
                querygen,
                generator=gen,
                pool=train,
                tau=tau,
                mapping_seed=mapping_seed,
                prioritize_new=prioritize_new,
            )
        else:
            assert hub is not None
            hub.update(batch, pool=train)
        tests.append(held)
        timings[f"index_{u}"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        for w in range(u + 1):
            unit = hub.unit_for_batch(batches[w].batch_id)
            hub_ranked = []
            replay_ranked = []
            for q in tests[w]:
                chosen = hub.search(
                    q.text, k=k_max, beam=beam, parallel=parallel, prioritize_new=prioritize_new
                )
                hub_ranked.append([tid for tid, _ in chosen.entries])
                replay = unit.search(q.text, hub.embedder, k=k_max, beam=beam)
                replay_ranked.append([tid for tid, _ in replay.entries])
            for k in ks:
                hits = [
                    precision_at_k(r, q.ground_truth_table_id, k)
                    for r, q in zip(hub_ranked, tests[w])
                ]
                pmat[k].set(u, w, mean_precision(hits) if hits else 0.0)
                hub_hits[k][(u, w)] = hits
                rhits = [
                    precision_at_k(r, q.ground_truth_table_id, k)
                    for r, q in zip(replay_ranked, tests[w])
                ]
                replay_pmat[k].set(u, w, mean_precision(rhits) if rhits else 0.0)
        timings[f"eval_{u}"] = time.perf_counter() - t0

    ap = {
        k: [
            float(average_performance([hub_hits[k][(u, w)] for w in range(u + 1)]))
            for u in range(stages)
        ]
        for k in ks
    }
    ft = {k: [float(forgetting(pmat[k], u)) for u in range(1, stages)] for k in ks}
    lp = {k: [float(learning_performance(pmat[k], u)) for u in range(1, stages)] for k in ks}
    replay_ft = {
        k: [float(forgetting(replay_pmat[k], u)) for u in range(1, stages)] for k in ks
    }
    return ScenarioReport(
        splits=list(splits),
        sizes=[len(b) for b in batches],
        ks=list(ks),
        test_sizes=[len(t) for t in tests],
        pmatrix=pmat,
        replay_pmatrix=replay_pmat,
        ap=ap,
        ft=ft,
        lp=lp,
        replay_ft=replay_ft,
        timings=timings,
    )
