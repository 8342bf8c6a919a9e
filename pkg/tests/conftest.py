"""Shared fixtures and tiny stub components for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from tabdex import Repository, Table, TwoViewEmbedding


def make_table(tid: str, caption: str | None = None, columns=None, rows=None) -> Table:
    return Table(
        id=tid,
        caption=caption,
        columns=list(columns or ["a", "b"]),
        rows=[list(r) for r in (rows or [["1", "2"]])],
    )


@pytest.fixture
def small_repo() -> Repository:
    tables = [
        Table(
            id="films",
            caption="On Golden Pond",
            columns=["Directed by", "Starring"],
            rows=[["Mark Rydell", "Henry Fonda"]],
        ),
        Table(
            id="ports",
            caption="harbor traffic",
            columns=["name", "tonnage"],
            rows=[["oslo", "120"], ["kiel", "88"]],
        ),
        Table(
            id="birds",
            caption=None,
            columns=["species", "wingspan"],
            rows=[["heron", "180"]],
        ),
    ]
    return Repository(tables=tables)


class DictScorer:
    """Scorer with hand-fixed conditional distributions, for decoder tests.

    `table` maps a prefix tuple to {token: probability}. Tokens absent from
    a prefix's row score zero.
    """

    def __init__(self, table: dict[tuple, dict[int, float]]):
        self.table = table

    def encode_query(self, query: str):
        return query

    def next_token_dist(self, query_repr, prefix, allowed):
        row = self.table.get(tuple(prefix), {})
        return {tok: row.get(tok, 0.0) for tok in allowed}


class VectorEmbedder:
    """Embedder stub returning fixed vectors per exact text, zero otherwise."""

    def __init__(self, mapping: dict[str, np.ndarray], dim: int):
        from tabdex import EmbedderConfig

        self.mapping = {k: np.asarray(v, dtype=float) for k, v in mapping.items()}
        self.config = EmbedderConfig(dim=dim)

    def embed(self, text: str) -> np.ndarray:
        vec = self.mapping.get(text)
        if vec is None:
            return np.zeros(self.config.dim)
        return vec


def two_view_fixture() -> tuple[Repository, dict[str, TwoViewEmbedding]]:
    """Sixteen tables with engineered view-1 groups and view-2 near-duplicates.

    View 1 forms two groups of eight, each with two sub-groups of four.
    Inside one sub-group, view 2 places T2 and T5 almost on top of each
    other, T1 nearby, and T6 far away, so a k=c=l=2 build sends the
    recursion two view-2 levels deep and leaves T2 and T5 sharing a leaf.
    """
    tables = [
        Table(id=f"T{i}", caption=f"cap {i}", columns=["a"], rows=[[f"v{i}"]])
        for i in range(1, 17)
    ]
    h1: dict[str, np.ndarray] = {}
    h2: dict[str, np.ndarray] = {}
    for i in range(1, 9):
        sub = 0 if i in (1, 2, 5, 6) else 1
        h1[f"T{i}"] = np.array([0.0 + 0.1 * i, 50.0 * sub])
    for i in range(9, 17):
        sub = 0 if i < 13 else 1
        h1[f"T{i}"] = np.array([100.0 + 0.1 * i, 50.0 * sub])
    for i in range(1, 17):
        h2[f"T{i}"] = np.array([5.0, 5.0]) + 0.01 * i
    h2["T2"] = np.array([0.0, 0.0])
    h2["T5"] = np.array([0.0, 0.2])
    h2["T1"] = np.array([0.0, 2.0])
    h2["T6"] = np.array([0.0, 10.0])
    for i in range(9, 17):
        h2[f"T{i}"] = np.array([float(i), 0.0])
    emb = {t.id: TwoViewEmbedding(h1[t.id], h2[t.id]) for t in tables}
    return Repository(tables=tables), emb
