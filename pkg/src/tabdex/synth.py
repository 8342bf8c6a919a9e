"""Synthetic repositories and planted point sets for tests and benchmarks.

Tables come in topic groups with disjoint vocabularies: group-specific
caption words, column names, and cell fillers, plus a unique id token per
table. Template queries over such tables carry enough group and table
signal for embedding-based routing to have something to find.
"""

from __future__ import annotations

import numpy as np

from .tables import Repository, Table

_NOUNS = (
    "harbor", "orchid", "basalt", "meadow", "copper", "lantern", "juniper",
    "quarry", "thistle", "falcon", "cobalt", "prairie", "ember", "walnut",
    "glacier", "sorrel", "marble", "heron", "indigo", "bramble", "saffron",
    "granite", "osprey", "clover",
)


def _group_vocab(group: int) -> dict[str, str]:
    noun = _NOUNS[group % len(_NOUNS)]
    tag = f"{noun}{group:02d}"
    return {
        "topic_a": tag,
        "topic_b": f"{tag}works",
        "filler": f"{tag}grade",
        "col_name": f"{tag}name",
        "col_metric": f"{tag}metric",
        "col_status": f"{tag}status",
    }


def synthetic_repository(
    num_tables: int,
    num_groups: int,
    seed: int = 0,
    rows_range: tuple[int, int] = (2, 4),
    batch_id: int = 0,
    id_prefix: str = "t",
) -> Repository:
    """Tables spread round-robin over well-separated topic groups."""
    if num_tables < 1 or num_groups < 1:
        raise ValueError("need at least one table and one group")
    rng = np.random.default_rng(seed)
    tables = []
    for i in range(num_tables):
        group = i % num_groups
        vocab = _group_vocab(group)
        uid = f"{id_prefix}{i:05d}"
        # three unique caption words per table: captions ride along in every
        # synthetic query, so they carry most of the per-table signal
        caption = (
            f"{vocab['topic_a']} {vocab['topic_b']} register"
            f" {uid} lot{i:05d} series{i:05d}"
        )
        columns = [vocab["col_name"], vocab["col_metric"], vocab["col_status"]]
        num_rows = int(rng.integers(rows_range[0], rows_range[1] + 1))
        rows = []
        for r in range(num_rows):
            rows.append(
                [
                    f"entry{i}x{r}",
                    f"m{i}x{r}v{int(rng.integers(1000))}",
                    vocab["topic_a"] if r % 2 == 0 else vocab["topic_b"],
                ]
            )
        tables.append(Table(id=uid, caption=caption, columns=columns, rows=rows))
    return Repository(tables=tables, batch_id=batch_id)


def group_of(table_id: str, num_groups: int, id_prefix: str = "t") -> int:
    """Recover the planted group of a synthetic table id."""
    return int(table_id[len(id_prefix):]) % num_groups


def planted_points(
    n: int,
    k: int,
    dim: int,
    seed: int = 0,
    separation: float = 10.0,
    spread: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """n points around k well-separated Gaussian centers; returns (points, labels)."""
    rng = np.random.default_rng(seed)
    # axis-aligned lattice centers guarantee pairwise distance >= separation,
    # which random centers would not
    centers = np.zeros((k, dim))
    for j in range(k):
        centers[j, j % dim] = separation * (1 + j // dim)
    labels = rng.integers(k, size=n)
    points = centers[labels] + rng.normal(scale=spread, size=(n, dim))
    return points, labels
