"""Command-line driver for building, querying, updating, and evaluating indexes.

Output discipline: results are line-oriented JSON on stdout, diagnostics
go to stderr. The default seed comes from BIRDIE_SEED when set; every
command records its effective configs in the index manifest. Commands that
touch an index directory take an advisory file lock on it.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from filelock import FileLock

from . import store
from .decoder import DEFAULT_BEAM, DEFAULT_TAU
from .embedding import EmbedderConfig, HashedBagEmbedder
from .errors import TabdexError, UnknownTableError
from .evaluation import run_dynamic_scenario
from .hub import MemoryHub
from .querygen import QueryGenConfig, TemplateQueryGenerator, build_query_pool
from .report import write_scenario_outputs
from .tables import ingest_repository
from .tree import ClusteringConfig, recommended_k_bounds

log = logging.getLogger("tabdex")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MISSING_FILE = 2
EXIT_UNKNOWN_ID = 3


def _default_seed() -> int:
    return int(os.environ.get("BIRDIE_SEED", "0"))


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj) + "\n")


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return p


def _require_index(path: str) -> Path:
    p = Path(path)
    if not (p / store.MANIFEST_FILE).is_file():
        raise FileNotFoundError(f"no index manifest under: {path}")
    return p


def _lock(index_dir: Path) -> FileLock:
    return FileLock(index_dir / ".lock", timeout=30)


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(_require_file(path).read_text(encoding="utf-8"))


def _pick(flag, config_block: dict, key: str, fallback):
    """Explicit flag beats config file beats built-in default."""
    if flag is not None:
        return flag
    if key in config_block:
        return config_block[key]
    return fallback


# ---------------------------------------------------------------------------
# commands


def cmd_ingest_check(args) -> int:
    repo = ingest_repository(_require_file(args.repo))
    _emit(
        {
            "tables": len(repo),
            "rows": sum(t.num_rows for t in repo),
            "captioned": sum(1 for t in repo if t.caption),
        }
    )
    return EXIT_OK


def cmd_build(args) -> int:
    repo_path = _require_file(args.repo)
    out = Path(args.out)
    if out.exists() and any(out.iterdir()) and not args.force:
        raise TabdexError(f"refusing to build into non-empty directory {out} (use --force)")
    config = _load_config_file(args.config)
    seed = _pick(args.seed, config, "seed", _default_seed())
    repo = ingest_repository(repo_path)

    emb_block = config.get("embedder", {})
    embedder = HashedBagEmbedder(
        EmbedderConfig(
            dim=_pick(args.dim, emb_block, "dim", 64),
            max_tokens=_pick(args.max_tokens, emb_block, "max_tokens", 512),
            seed=_pick(None, emb_block, "seed", seed),
        )
    )
    clu_block = config.get("clustering", {})
    k = _pick(args.k, clu_block, "k", None)
    if k is None:
        lo, hi = recommended_k_bounds(max(len(repo), 2), _pick(args.l, clu_block, "l", 2))
        k = max(2, round(math.sqrt(lo * hi)))
    clustering = ClusteringConfig(
        k=k,
        c=_pick(args.c, clu_block, "c", None),
        l=_pick(args.l, clu_block, "l", 2),
        kmeans_iters=_pick(args.kmeans_iters, clu_block, "kmeans_iters", 50),
        minibatch=_pick(args.minibatch, clu_block, "minibatch", None),
        seed=_pick(None, clu_block, "seed", seed),
    )
    lo, hi = recommended_k_bounds(max(len(repo), 2), clustering.l)
    if not lo < clustering.k < hi:
        log.warning(
            "k=%d outside recommended range (%.2f, %.2f) for %d tables; proceeding",
            clustering.k, lo, hi, len(repo),
        )
    qg_block = config.get("querygen", {})
    querygen = QueryGenConfig(
        B=_pick(args.B, qg_block, "B", 20),
        b=_pick(args.b, qg_block, "b", 5),
        seed=_pick(None, qg_block, "seed", seed),
    )
    out.mkdir(parents=True, exist_ok=True)
    with _lock(out):
        hub = MemoryHub.build(
            repo,
            clustering,
            embedder,
            querygen,
            tau=_pick(args.tau, config, "tau", DEFAULT_TAU),
            mapping_seed=_pick(None, config, "mapping_seed", seed),
            prioritize_new=bool(config.get("prioritize_new", False)),
        )
        store.save_hub(hub, out)
    _emit({"indexed": len(repo), "k": clustering.k, "out": str(out)})
    return EXIT_OK


def cmd_genq(args) -> int:
    repo = ingest_repository(_require_file(args.repo))
    cfg = QueryGenConfig(B=args.B, b=args.b, seed=args.seed if args.seed is not None else _default_seed())
    pool = build_query_pool(repo, TemplateQueryGenerator(cfg.seed), cfg)
    store.save_query_pool(pool, args.out)
    _emit(
        {
            "tables": len(pool),
            "queries": sum(len(qs) for qs in pool.values()),
            "out": args.out,
        }
    )
    return EXIT_OK


def cmd_search(args) -> int:
    index_dir = _require_index(args.index)
    with _lock(index_dir):
        hub = store.load_hub(index_dir)
    result = hub.search(
        args.q,
        k=args.topk,
        beam=args.beam,
        parallel=args.parallel,
        prioritize_new=args.prioritize_new or None,
    )
    for rank, (table_id, log_prob) in enumerate(result.entries, start=1):
        _emit({"rank": rank, "table_id": table_id, "log_prob": log_prob})
    return EXIT_OK


def cmd_update(args) -> int:
    index_dir = _require_index(args.index)
    batch_path = _require_file(args.batch)
    with _lock(index_dir):
        hub = store.load_hub(index_dir)
        batch_id = max(u.batch_id for u in hub.units) + 1
        batch = ingest_repository(batch_path, batch_id=batch_id)
        unit = hub.update(batch)
        store.save_hub(hub, index_dir)
    _emit({"batch_id": unit.batch_id, "indexed": len(batch), "total": hub.table_count()})
    return EXIT_OK


def cmd_delete(args) -> int:
    index_dir = _require_index(args.index)
    with _lock(index_dir):
        hub = store.load_hub(index_dir)
        tabid = hub.tree.tabid_map.get(args.id)
        if tabid is None:
            raise UnknownTableError(f"table id {args.id!r} not in index")
        owner = next(u.batch_id for u in hub.units if u.trie.lookup(tabid) == args.id)
        hub.delete(args.id)
        store.save_hub(hub, index_dir, rewrite_units=(owner,))
    _emit({"deleted": args.id, "remaining": hub.table_count()})
    return EXIT_OK


def cmd_eval(args) -> int:
    repo = ingest_repository(_require_file(args.repo))
    config = _load_config_file(args.config)
    seed = args.seed if args.seed is not None else _default_seed()
    splits = [float(s) for s in args.splits.split(",")]
    ks = [int(k) for k in args.k.split(",")]
    emb_block = config.get("embedder", {})
    embedder = HashedBagEmbedder(
        EmbedderConfig(
            dim=_pick(args.dim, emb_block, "dim", 64),
            max_tokens=_pick(args.max_tokens, emb_block, "max_tokens", 512),
            seed=_pick(None, emb_block, "seed", seed),
        )
    )
    clu_block = config.get("clustering", {})
    base_size = max(2, int(len(repo) * splits[0]))
    k = _pick(args.kclusters, clu_block, "k", None)
    if k is None:
        lo, hi = recommended_k_bounds(base_size, _pick(args.l, clu_block, "l", 2))
        k = max(2, round(math.sqrt(lo * hi)))
    clustering = ClusteringConfig(
        k=k,
        c=_pick(args.c, clu_block, "c", None),
        l=_pick(args.l, clu_block, "l", 2),
        seed=_pick(None, clu_block, "seed", seed),
    )
    querygen = QueryGenConfig(
        B=_pick(args.B, config.get("querygen", {}), "B", 20),
        b=_pick(args.b, config.get("querygen", {}), "b", 5),
        seed=seed,
    )
    report = run_dynamic_scenario(
        repo,
        clustering,
        embedder,
        querygen,
        splits=splits,
        seed=seed,
        ks=ks,
        beam=args.beam,
        tau=_pick(args.tau, config, "tau", DEFAULT_TAU),
        prioritize_new=args.prioritize_new,
        parallel=args.parallel,
        mapping_seed=seed,
    )
    written = write_scenario_outputs(report, args.out)
    summary = report.to_json_dict()
    summary["outputs"] = written
    summary["out_dir"] = str(args.out)
    _emit(summary)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tabdex",
        description="Generative table-discovery index over natural-language queries.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest-check", help="validate a repository JSONL file")
    p.add_argument("--repo", required=True)
    p.set_defaults(func=cmd_ingest_check)

    p = sub.add_parser("build", help="build a fresh index directory from a repository")
    p.add_argument("--repo", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON config file mirroring the manifest blocks")
    p.add_argument("--seed", type=int)
    p.add_argument("--k", type=int, help="clusters per split (default: from repo size)")
    p.add_argument("--c", type=int, help="max leaf size (default: k)")
    p.add_argument("--l", type=int, help="levels clustered on the header view")
    p.add_argument("--dim", type=int)
    p.add_argument("--max-tokens", dest="max_tokens", type=int)
    p.add_argument("--kmeans-iters", dest="kmeans_iters", type=int)
    p.add_argument("--minibatch", type=int)
    p.add_argument("--B", type=int, dest="B")
    p.add_argument("--b", type=int, dest="b")
    p.add_argument("--tau", type=float)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("genq", help="write a synthetic query pool for a repository")
    p.add_argument("--repo", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--B", type=int, default=20)
    p.add_argument("--b", type=int, default=5)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_genq)

    p = sub.add_parser("search", help="query an index")
    p.add_argument("--index", required=True)
    p.add_argument("--q", required=True)
    p.add_argument("--topk", type=int, default=5)
    p.add_argument("--beam", type=int, default=DEFAULT_BEAM)
    p.add_argument("--prioritize-new", action="store_true")
    p.add_argument("--parallel", action="store_true")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("update", help="index an arrival batch as a new sealed unit")
    p.add_argument("--index", required=True)
    p.add_argument("--batch", required=True)
    p.set_defaults(func=cmd_update)

    p = sub.add_parser("delete", help="retire one table id from the index")
    p.add_argument("--index", required=True)
    p.add_argument("--id", required=True)
    p.set_defaults(func=cmd_delete)

    p = sub.add_parser("eval", help="run the dynamic continual-indexing scenario")
    p.add_argument("--repo", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--splits", default="0.7,0.1,0.1,0.1")
    p.add_argument("--seed", type=int)
    p.add_argument("--k", default="1,5", help="comma-separated precision cutoffs")
    p.add_argument("--kclusters", type=int)
    p.add_argument("--c", type=int)
    p.add_argument("--l", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--max-tokens", dest="max_tokens", type=int)
    p.add_argument("--B", type=int, dest="B")
    p.add_argument("--b", type=int, dest="b")
    p.add_argument("--beam", type=int, default=DEFAULT_BEAM)
    p.add_argument("--tau", type=float)
    p.add_argument("--config")
    p.add_argument("--prioritize-new", action="store_true")
    p.add_argument("--parallel", action="store_true")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        log.error("%s", exc)
        return EXIT_MISSING_FILE
    except UnknownTableError as exc:
        log.error("%s", exc)
        return EXIT_UNKNOWN_ID
    except (TabdexError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
