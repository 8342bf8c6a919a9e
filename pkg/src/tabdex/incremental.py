"""Insert and delete tables against a built tree without touching old tabids.

Insertion descends the tree, at each level picking the child whose center
is nearest to the new table's embedding in that level's view. Three cases,
with d the distance to the chosen child's center:

  I   d <= cohesion: the child absorbs the table, statistics unchanged.
  II  cohesion < d <= radius: the child absorbs the table; its center and
      cohesion become exact running means and its radius is re-estimated by
      a uniform draw between provable lower/upper bounds (triangle
      inequality on the old radius and the center shift).
  III d > radius: a brand-new sibling leaf is created around the table,
      taking the next unused child ordinal.

Existing tabids are never reassigned; leaves simply grow. Deletion only
retires the tabid from the trie and the id map, leaving statistics alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import TwoViewEmbedding, dist
from .errors import DuplicateTableError, UnknownTableError
from .tables import Table
from .tree import ClusterNode, SemanticTree, TabId


@dataclass(frozen=True)
class CaseRecord:
    """What happened at one descent level."""

    level: int
    case: str  # "I", "II", or "III"
    distance: float
    cohesion: float  # child stats observed before the update
    radius: float


@dataclass(frozen=True)
class InsertionOutcome:
    tabid: TabId
    case_trace: tuple[CaseRecord, ...]


def closest_child(node: ClusterNode, h_new: np.ndarray) -> tuple[int, float]:
    """(ordinal, distance) of the child center nearest to h_new.

    Ties go to the lowest ordinal. Leaf nodes have no children to choose
    from and are rejected.
    """
    if node.is_leaf:
        raise ValueError("closest_child called on a leaf node")
    assert node.children is not None
    distances = np.array([dist(child.center, h_new) for child in node.children])
    ordinal = int(distances.argmin())
    return ordinal, float(distances[ordinal])


def estimate_radius(
    r: float,
    c_old: np.ndarray,
    c_new: np.ndarray,
    h_new: np.ndarray,
    rng: np.random.Generator,
) -> float:
    """Sample the post-insertion radius between its provable bounds.

    The new radius cannot be below the new member's distance to the moved
    center and cannot exceed the old radius plus the center shift.
    """
    lower = dist(h_new, c_new)
    upper = r + dist(c_old, c_new)
    if lower > upper:  # floating error can invert a degenerate interval
        return lower
    return float(rng.uniform(lower, upper))


def insert_table(tree: SemanticTree, t: Table, emb: TwoViewEmbedding) -> InsertionOutcome:
    """Assign a tabid to a new table, updating statistics per case.

    The caller must hold exclusive access to the tree; partial updates are
    never visible to concurrent readers by contract.
    """
    if t.id in tree.tabid_map:
        raise DuplicateTableError(f"table id {t.id!r} already indexed")
    node = tree.root
    path: list[int] = []
    trace: list[CaseRecord] = []
    level = 0
    while True:
        node.size += 1
        if node.is_leaf:
            assert node.slots is not None
            position = node.next_position()
            node.slots.append((t.id, position))
            tabid = tuple(path) + (position,)
            tree.tabid_map[t.id] = tabid
            return InsertionOutcome(tabid=tabid, case_trace=tuple(trace))
        assert node.children is not None
        h_new = emb.h1 if node.children[0].view == 1 else emb.h2
        ordinal, d = closest_child(node, h_new)
        child = node.children[ordinal]
        if d <= child.cohesion:
            trace.append(CaseRecord(level, "I", d, child.cohesion, child.radius))
        elif d <= child.radius:
            trace.append(CaseRecord(level, "II", d, child.cohesion, child.radius))
            n = child.size  # size before this insertion: exact running means
            c_new = (n * child.center + h_new) / (n + 1)
            new_cohesion = (n * child.cohesion + d) / (n + 1)
            new_radius = estimate_radius(child.radius, child.center, c_new, h_new, tree.rng)
            if new_cohesion > new_radius:
                new_cohesion = new_radius  # keep cohesion <= radius
            child.center = c_new
            child.cohesion = float(new_cohesion)
            child.radius = new_radius
        else:
            trace.append(CaseRecord(level, "III", d, child.cohesion, child.radius))
            siblings = node.children
            ordinal = len(siblings)  # next unused ordinal; deletions never free one
            if siblings:
                radius = float(np.mean([s.radius for s in siblings]))
                cohesion = float(np.mean([s.cohesion for s in siblings]))
                view = siblings[0].view
            else:
                radius = cohesion = 0.0
                view = 1
            child = ClusterNode(
                center=np.array(h_new, dtype=np.float64, copy=True),
                radius=radius,
                cohesion=cohesion,
                view=view,
                size=0,  # bumped to 1 on arrival below
                slots=[],
            )
            siblings.append(child)
        path.append(ordinal)
        node = child
        level += 1


def delete_table(tree: SemanticTree, trie, table_id: str) -> None:
    """Retire a table: drop its tabid from the trie and the id map.

    Tree statistics are deliberately left untouched; the tabid is gone for
    good and is never reused.
    """
    if table_id not in tree.tabid_map:
        raise UnknownTableError(f"table id {table_id!r} not in index")
    tabid = tree.tabid_map.pop(table_id)
    trie.delete(tabid)
