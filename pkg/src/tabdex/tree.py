"""Hierarchical clustering of table embeddings into a tabid tree.

The builder recursively k-means-splits the repository. The first ``l``
levels cluster header-view embeddings; at recursion level ``l`` the member
set is re-represented by body-view embeddings and clustering continues on
those. A cluster with at most ``c`` members becomes a leaf. Every table's
identifier (tabid) is the sequence of child ordinals from the root to its
leaf plus its position inside the leaf, so prefix structure mirrors
semantic structure.

Nodes keep only (center, radius, cohesion, view, size); the member
embeddings themselves are discarded after the build.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

TabId = tuple[int, ...]


def format_tabid(tabid: Sequence[int]) -> str:
    return "-".join(str(t) for t in tabid)


def parse_tabid(text: str) -> TabId:
    if not text:
        return ()
    return tuple(int(t) for t in text.split("-"))


@dataclass
class ClusteringConfig:
    k: int
    c: int | None = None
    l: int = 2
    kmeans_iters: int = 50
    minibatch: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.c is None:
            # default mirrors the usual setting of equal branch and leaf width
            self.c = self.k
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if self.c < 1:
            raise ValueError("c must be >= 1")
        if self.l < 1:
            raise ValueError("l must be >= 1")


def recommended_k_bounds(n: int, l: int) -> tuple[float, float]:
    """Heuristic (lower, upper) range for k given the repository size."""
    return n ** (1.0 / (2 * l + 1)), n ** (1.0 / (l + 1))


@dataclass
class ClusterNode:
    center: np.ndarray
    radius: float
    cohesion: float
    view: int
    size: int
    children: list["ClusterNode"] | None = None
    slots: list[tuple[str, int]] | None = None  # leaf only: (table_id, position)

    @property
    def is_leaf(self) -> bool:
        return self.children is None

    def position_map(self) -> dict[int, str]:
        assert self.slots is not None
        return {pos: tid for tid, pos in self.slots}

    def next_position(self) -> int:
        # positions are append-only, so the slot count is the next free one
        assert self.slots is not None
        return len(self.slots)


@dataclass
class SemanticTree:
    root: ClusterNode
    config: ClusteringConfig
    tabid_map: dict[str, TabId]
    rng: np.random.Generator

    def node_at(self, path: Sequence[int]) -> ClusterNode:
        node = self.root
        for token in path:
            if node.is_leaf:
                raise ValueError(f"path {format_tabid(path)} descends past a leaf")
            assert node.children is not None
            if not 0 <= token < len(node.children):
                raise ValueError(f"path {format_tabid(path)} has no child {token}")
            node = node.children[token]
        return node

    def nodes(self) -> Iterator[ClusterNode]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if node.children:
                stack.extend(reversed(node.children))

    def node_count(self) -> int:
        return sum(1 for _ in self.nodes())

    def stored_floats(self) -> int:
        return sum(len(n.center) + 2 for n in self.nodes())


def node_stats(members: np.ndarray, center: np.ndarray) -> tuple[float, float]:
    """(radius, cohesion) of a member set: max and mean distance to center."""
    if len(members) == 0:
        raise ValueError("node_stats requires at least one member")
    dists = np.linalg.norm(np.asarray(members, dtype=np.float64) - center, axis=1)
    return float(dists.max()), float(dists.mean())


# ---------------------------------------------------------------------------
# k-means


def _sqdist(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = (
        (points * points).sum(axis=1)[:, None]
        + (centers * centers).sum(axis=1)[None, :]
        - 2.0 * points @ centers.T
    )
    return np.maximum(d2, 0.0)

def _kmeanspp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    first = int(rng.integers(n))
    centers = [points[first].copy()]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    while len(centers) < k:
        total = d2.sum()
        if total <= 0.0:
            break  # every remaining point coincides with a chosen center
        idx = int(rng.choice(n, p=d2 / total))
        centers.append(points[idx].copy())
        d2 = np.minimum(d2, ((points - centers[-1]) ** 2).sum(axis=1))
    return np.stack(centers)


def _lloyd(points: np.ndarray, centers: np.ndarray, iters: int) -> np.ndarray:
    assign: np.ndarray | None = None
    for _ in range(iters):
        new_assign = _sqdist(points, centers).argmin(axis=1)
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(len(centers)):
            mask = assign == j
            if mask.any():
                centers[j] = points[mask].mean(axis=0)
    return centers


def _minibatch(
    points: np.ndarray,
    centers: np.ndarray,
    iters: int,
    batch_size: int,
    rng: np.random.Generator,
) -> np.ndarray:
    n = len(points)
    counts = np.zeros(len(centers), dtype=np.float64)
    for _ in range(iters):
        idx = rng.choice(n, size=min(batch_size, n), replace=False)
        batch = points[idx]
        assign = _sqdist(batch, centers).argmin(axis=1)
        for j in np.unique(assign):
            members = batch[assign == j]
            total = counts[j] + len(members)
            # sequential per-center learning-rate updates collapse to a running mean
            centers[j] = (counts[j] * centers[j] + members.sum(axis=0)) / total
            counts[j] = total
    return centers


def kmeans(
    points: np.ndarray,
    k: int,
    cfg: ClusteringConfig,
    rng: np.random.Generator | None = None,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Seeded k-means++ clustering.

    Returns up to k non-empty clusters as (center, member_indices) in
    ordinal order; empty clusters are dropped and ordinals renumbered.
    Assignment ties go to the lowest ordinal. With ``cfg.minibatch`` set,
    centers are refined on seeded mini-batches instead of full passes.
    """
    points = np.asarray(points, dtype=np.float64)
    if len(points) == 0:
        raise ValueError("kmeans requires at least one point")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    centers = _kmeanspp_init(points, k, rng)
    if len(centers) > 1:
        if cfg.minibatch is not None:
            centers = _minibatch(points, centers, cfg.kmeans_iters, cfg.minibatch, rng)
        else:
            centers = _lloyd(points, centers, cfg.kmeans_iters)
    assign = _sqdist(points, centers).argmin(axis=1)
    clusters = []
    for j in range(len(centers)):
        members = np.where(assign == j)[0]
        if len(members):
            clusters.append((centers[j], members))
    return clusters


# ---------------------------------------------------------------------------
# tree construction


def build_tree(repo, embeddings, cfg: ClusteringConfig) -> SemanticTree:
    """Cluster a repository into a tabid tree.

    ``embeddings`` maps table id to its two-view embedding. The root is
    split unconditionally (even when N <= c) so every tabid has at least a
    path token and a position token.
    """
    tables = list(repo)
    if not tables:
        raise ValueError("cannot build an index from an empty repository")
    missing = [t.id for t in tables if t.id not in embeddings]
    if missing:
        raise ValueError(f"missing embeddings for {len(missing)} tables (first: {missing[0]!r})")
    ids = [t.id for t in tables]
    views = {
        1: np.stack([np.asarray(embeddings[i].h1, dtype=np.float64) for i in ids]),
        2: np.stack([np.asarray(embeddings[i].h2, dtype=np.float64) for i in ids]),
    }
    rng = np.random.default_rng(cfg.seed)

    def split(member_idx: np.ndarray, level: int) -> list[ClusterNode]:
        view = 1 if level < cfg.l else 2
        points = views[view][member_idx]
        clusters = kmeans(points, cfg.k, cfg, rng)
        # a split that cannot separate anything (all members identical) would
        # recurse forever; park the whole set in one oversized leaf instead
        no_progress = len(clusters) == 1 and len(clusters[0][1]) == len(member_idx)
        children = []
        for center, rel in clusters:
            sub_idx = member_idx[rel]
            radius, cohesion = node_stats(points[rel], center)
            if len(sub_idx) > cfg.c and not no_progress:
                node = ClusterNode(
                    center=center,
                    radius=radius,
                    cohesion=cohesion,
                    view=view,
                    size=len(sub_idx),
                    children=split(sub_idx, level + 1),
                )
            else:
                node = ClusterNode(
                    center=center,
                    radius=radius,
                    cohesion=cohesion,
                    view=view,
                    size=len(sub_idx),
                    slots=[(ids[j], pos) for pos, j in enumerate(sub_idx.tolist())],
                )
            children.append(node)
        return children

    all_idx = np.arange(len(ids))
    children = split(all_idx, 0)
    root_center = views[1].mean(axis=0)
    root_radius, root_cohesion = node_stats(views[1], root_center)
    root = ClusterNode(
        center=root_center,
        radius=root_radius,
        cohesion=root_cohesion,
        view=1,
        size=len(ids),
        children=children,
    )
    return SemanticTree(root=root, config=cfg, tabid_map=assign_tabids(root), rng=rng)


def assign_tabids(root: ClusterNode) -> dict[str, TabId]:
    """Read tabids off a finished tree: child ordinals down to leaf, then position."""
    mapping: dict[str, TabId] = {}

    def walk(node: ClusterNode, path: TabId) -> None:
        if node.is_leaf:
            assert node.slots is not None
            for table_id, position in node.slots:
                mapping[table_id] = path + (position,)
            return
        assert node.children is not None
        for ordinal, child in enumerate(node.children):
            walk(child, path + (ordinal,))

    walk(root, ())
    return mapping


# ---------------------------------------------------------------------------
# exact equality (persistence round trips must be bit-exact)


def nodes_equal(a: ClusterNode, b: ClusterNode) -> bool:
    if (
        not np.array_equal(a.center, b.center)
        or a.radius != b.radius
        or a.cohesion != b.cohesion
        or a.view != b.view
        or a.size != b.size
        or a.is_leaf != b.is_leaf
    ):
        return False
    if a.is_leaf:
        return a.slots == b.slots
    assert a.children is not None and b.children is not None
    if len(a.children) != len(b.children):
        return False
    return all(nodes_equal(x, y) for x, y in zip(a.children, b.children))


def trees_equal(a: SemanticTree, b: SemanticTree) -> bool:
    return (
        a.config == b.config
        and a.tabid_map == b.tabid_map
        and a.rng.bit_generator.state == b.rng.bit_generator.state
        and nodes_equal(a.root, b.root)
    )
