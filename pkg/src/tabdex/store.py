"""Persistence for trees, query pools, memory units, and whole hubs.

Everything is JSON with sorted keys and compact separators, so a given
in-memory state always serializes to the same bytes and floats round-trip
exactly (json uses repr-shortest float encoding). A hub lives in one
directory: a manifest, the shared tree, and one unit file plus one pool
file per batch. Sealed unit files are written once and never touched by
later updates.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from .decoder import TabIdTrie
from .embedding import Embedder, EmbedderConfig, HashedBagEmbedder, RandomProjectionEmbedder
from .hub import MemoryHub, MemoryUnit, _embed_pool
from .querygen import QueryGenConfig, SyntheticQuery, TemplateQueryGenerator
from .tree import ClusteringConfig, ClusterNode, SemanticTree, TabId, format_tabid, parse_tabid

TREE_FORMAT = "tabdex-tree"
UNIT_FORMAT = "tabdex-unit"
MANIFEST_FORMAT = "tabdex-index"
FORMAT_VERSION = 1

MANIFEST_FILE = "manifest.json"
TREE_FILE = "tree.json"


def _dump(obj, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def _load(path: str | Path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _check_format(data: dict, expected: str, path) -> None:
    if data.get("format") != expected or data.get("version") != FORMAT_VERSION:
        raise ValueError(
            f"{path}: expected {expected} v{FORMAT_VERSION}, "
            f"found {data.get('format')!r} v{data.get('version')!r}"
        )


# ---------------------------------------------------------------------------
# tree


def _node_to_dict(node: ClusterNode) -> dict:
    data = {
        "center": node.center.tolist(),
        "radius": node.radius,
        "cohesion": node.cohesion,
        "view": node.view,
        "size": node.size,
    }
    if node.is_leaf:
        data["slots"] = [[tid, pos] for tid, pos in node.slots or []]
    else:
        data["children"] = [_node_to_dict(c) for c in node.children or []]
    return data


def _node_from_dict(data: dict) -> ClusterNode:
    common = dict(
        center=np.array(data["center"], dtype=np.float64),
        radius=data["radius"],
        cohesion=data["cohesion"],
        view=data["view"],
        size=data["size"],
    )
    if "slots" in data:
        return ClusterNode(**common, slots=[(tid, pos) for tid, pos in data["slots"]])
    return ClusterNode(**common, children=[_node_from_dict(c) for c in data["children"]])


def save_tree(tree: SemanticTree, path: str | Path) -> None:
    _dump(
        {
            "format": TREE_FORMAT,
            "version": FORMAT_VERSION,
            "config": dataclasses.asdict(tree.config),
            "rng_state": tree.rng.bit_generator.state,
            "root": _node_to_dict(tree.root),
            "tabid_map": {tid: list(tabid) for tid, tabid in tree.tabid_map.items()},
        },
        path,
    )


def load_tree(path: str | Path) -> SemanticTree:
    data = _load(path)
    _check_format(data, TREE_FORMAT, path)
    rng = np.random.default_rng()
    rng.bit_generator.state = data["rng_state"]
    return SemanticTree(
        root=_node_from_dict(data["root"]),
        config=ClusteringConfig(**data["config"]),
        tabid_map={tid: tuple(tabid) for tid, tabid in data["tabid_map"].items()},
        rng=rng,
    )


# ---------------------------------------------------------------------------
# query pools


def save_query_pool(pool: dict[str, list], path: str | Path) -> None:
    """JSONL, one {table_id, queries} record per table, repository order."""
    with open(path, "w", encoding="utf-8") as fh:
        for table_id, queries in pool.items():
            texts = [q if isinstance(q, str) else q.text for q in queries]
            record = {"table_id": table_id, "queries": texts}
            fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")


def load_query_pool(path: str | Path) -> dict[str, list[SyntheticQuery]]:
    pool: dict[str, list[SyntheticQuery]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            tid = record["table_id"]
            pool[tid] = [SyntheticQuery(text=t, table_id=tid) for t in record["queries"]]
    return pool


# ---------------------------------------------------------------------------
# embedder configs


def embedder_to_dict(embedder: Embedder) -> dict:
    kind = "random-projection" if isinstance(embedder, RandomProjectionEmbedder) else "hashed-bag"
    return {
        "kind": kind,
        "dim": embedder.config.dim,
        "max_tokens": embedder.config.max_tokens,
        "seed": embedder.config.seed,
    }


def embedder_from_dict(data: dict) -> Embedder:
    cfg = EmbedderConfig(dim=data["dim"], max_tokens=data["max_tokens"], seed=data["seed"])
    if data.get("kind") == "random-projection":
        return RandomProjectionEmbedder(cfg)
    return HashedBagEmbedder(cfg)


# ---------------------------------------------------------------------------
# memory units


def _unit_file(batch_id: int) -> str:
    return f"unit_{batch_id:05d}.json"


def _pool_file(batch_id: int) -> str:
    return f"pool_{batch_id:05d}.jsonl"


def save_unit(unit: MemoryUnit, path: str | Path) -> None:
    routing = {
        format_tabid(prefix): {str(tok): vec.tolist() for tok, vec in entry.items()}
        for prefix, entry in unit.routing.items()
    }
    _dump(
        {
            "format": UNIT_FORMAT,
            "version": FORMAT_VERSION,
            "batch_id": unit.batch_id,
            "tau": unit.tau,
            "tabids": {tid: list(tabid) for tabid, tid in unit.trie.items()},
            "routing": routing,
        },
        path,
    )


def load_unit(path: str | Path, pool: dict[str, list[SyntheticQuery]], embedder: Embedder) -> MemoryUnit:
    data = _load(path)
    _check_format(data, UNIT_FORMAT, path)
    trie = TabIdTrie()
    for table_id, tabid in data["tabids"].items():
        trie.insert(tuple(tabid), table_id)
    routing: dict[TabId, dict[int, np.ndarray]] = {
        parse_tabid(prefix): {
            int(tok): np.array(vec, dtype=np.float64) for tok, vec in entry.items()
        }
        for prefix, entry in data["routing"].items()
    }
    texts, vectors = _embed_pool(pool, embedder)
    return MemoryUnit(
        batch_id=data["batch_id"],
        trie=trie,
        routing=routing,
        pool=texts,
        tau=data["tau"],
        sealed=True,
        pool_vectors=vectors,
    )


# ---------------------------------------------------------------------------
# hub directories


def save_hub(hub: MemoryHub, index_dir: str | Path, rewrite_units: tuple[int, ...] = ()) -> None:
    """Write manifest, tree, and any unit files not yet on disk.

    Sealed unit files already present are left alone unless their batch id
    is listed in ``rewrite_units`` (deletion is the one case that edits a
    sealed unit's tabid set).
    """
    index_dir = Path(index_dir)
    index_dir.mkdir(parents=True, exist_ok=True)
    save_tree(hub.tree, index_dir / TREE_FILE)
    units_meta = []
    for unit in sorted(hub.units, key=lambda u: u.batch_id):
        ufile, pfile = _unit_file(unit.batch_id), _pool_file(unit.batch_id)
        if not (index_dir / ufile).exists() or unit.batch_id in rewrite_units:
            save_unit(unit, index_dir / ufile)
            save_query_pool(unit.pool, index_dir / pfile)
        units_meta.append({"batch_id": unit.batch_id, "unit_file": ufile, "pool_file": pfile})
    _dump(
        {
            "format": MANIFEST_FORMAT,
            "version": FORMAT_VERSION,
            "embedder": embedder_to_dict(hub.embedder),
            "clustering": dataclasses.asdict(hub.tree.config),
            "querygen": dataclasses.asdict(hub.querygen),
            "tau": hub.tau,
            "mapping_seed": hub.mapping_seed,
            "prioritize_new": hub.prioritize_new,
            "tree_file": TREE_FILE,
            "units": units_meta,
        },
        index_dir / MANIFEST_FILE,
    )


def load_hub(index_dir: str | Path) -> MemoryHub:
    index_dir = Path(index_dir)
    manifest = _load(index_dir / MANIFEST_FILE)
    _check_format(manifest, MANIFEST_FORMAT, index_dir / MANIFEST_FILE)
    embedder = embedder_from_dict(manifest["embedder"])
    querygen = QueryGenConfig(**manifest["querygen"])
    tree = load_tree(index_dir / manifest["tree_file"])
    hub = MemoryHub(
        tree=tree,
        embedder=embedder,
        querygen=querygen,
        generator=TemplateQueryGenerator(querygen.seed),
        tau=manifest["tau"],
        mapping_seed=manifest["mapping_seed"],
        prioritize_new=manifest["prioritize_new"],
    )
    for meta in sorted(manifest["units"], key=lambda m: m["batch_id"]):
        pool = load_query_pool(index_dir / meta["pool_file"])
        hub.units.append(load_unit(index_dir / meta["unit_file"], pool, embedder))
    return hub
