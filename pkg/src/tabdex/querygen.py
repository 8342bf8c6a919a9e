"""Synthetic query generation: row sampling, a template generator, filtering.

Each table gets up to B queries. Rows are fed to the generator in small
sampled batches (without replacement, pool reset when it runs dry) so the
queries collectively see the whole table rather than just its first rows.
Generator output is a wire format of "Question: <text>" lines; the filter
strips the prefix, rejects malformed lines, and dedupes.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Protocol, runtime_checkable

import numpy as np

from .tables import Repository, Table, render_markdown

log = logging.getLogger(__name__)

QUESTION_PREFIX = "Question: "


@dataclass(frozen=True)
class QueryGenConfig:
    B: int = 20
    b: int = 5
    seed: int = 0
    max_attempts: int | None = None

    def __post_init__(self) -> None:
        if not self.B >= self.b >= 1:
            raise ValueError("need B >= b >= 1")
        if self.max_attempts is None:
            object.__setattr__(self, "max_attempts", 4 * math.ceil(self.B / self.b))


@dataclass(frozen=True)
class SyntheticQuery:
    text: str
    table_id: str


@runtime_checkable
class QueryGenerator(Protocol):
    def generate(self, markdown_table: str, b: int) -> list[str]: ...


def _stable_hash(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")


class TemplateQueryGenerator:
    """Seeded template instantiation over the rendered table.

    Stands in for a learned generator. Each query names one attribute and
    one cell and always includes the caption when there is one; roughly a
    fifth are phrased as aggregations. Deterministic in (seed, input).
    """

    def __init__(self, seed: int = 0):
        self.seed = seed

    def generate(self, markdown_table: str, b: int) -> list[str]:
        caption, columns, rows = _parse_markdown(markdown_table)
        rng = np.random.default_rng(
            np.random.SeedSequence([self.seed % 2**63, _stable_hash(markdown_table)])
        )
        out = []
        for _ in range(b):
            aggregation = rng.random() < 0.2
            if rows:
                row = rows[int(rng.integers(len(rows)))]
                col_idx = int(rng.integers(1, len(columns))) if len(columns) > 1 else 0
                attr, cell, subject = columns[col_idx], row[col_idx], row[0]
                if aggregation:
                    text = f"how many rows have {attr} = {cell}"
                else:
                    text = f"what is the {attr} of {subject}"
            else:
                attr = columns[int(rng.integers(len(columns)))]
                text = f"which {attr} values are listed"
            if caption:
                text += f" in {caption}"
            out.append(QUESTION_PREFIX + text + "?")
        return out


def _parse_markdown(text: str) -> tuple[str | None, list[str], list[list[str]]]:
    caption_parts: list[str] = []
    table_lines: list[str] = []
    for line in text.splitlines():
        if line.startswith("|"):
            table_lines.append(line)
        elif line.strip():
            caption_parts.append(line.strip())
    if not table_lines:
        raise ValueError("generator input contains no markdown table")
    columns = _split_md(table_lines[0])
    rows = [_split_md(line) for line in table_lines[2:]]  # skip the --- separator
    return (" ".join(caption_parts) or None), columns, rows


def _split_md(line: str) -> list[str]:
    return [cell.strip() for cell in line.strip().strip("|").split("|")]


def filter_queries(raw: Iterable[str], existing: Iterable[str] = ()) -> list[str]:
    """Keep well-formed, novel queries; strip the wire prefix."""
    seen = set(existing)
    kept = []
    for line in raw:
        if not line.startswith(QUESTION_PREFIX):
            continue
        text = line[len(QUESTION_PREFIX):]
        if not text or text in seen:
            continue
        seen.add(text)
        kept.append(text)
    return kept


def queries_for_table(
    table: Table, gen: QueryGenerator, cfg: QueryGenConfig
) -> list[SyntheticQuery]:
    """Sample row batches and collect filtered queries until B or the cap.

    Row batches of size r_s are drawn without replacement from a pool that
    resets once fewer than r_s rows remain, so early batches cover the
    table evenly before anything repeats.
    """
    n_v = math.ceil(cfg.B / cfg.b)
    r_s = max(1, len(table.rows) // n_v)
    rng = np.random.default_rng(
        np.random.SeedSequence([cfg.seed % 2**63, _stable_hash(table.id)])
    )
    pool = list(range(len(table.rows)))
    collected: list[str] = []
    attempts = 0
    assert cfg.max_attempts is not None
    while len(collected) < cfg.B and attempts < cfg.max_attempts:
        attempts += 1
        if table.rows:
            if len(pool) < r_s:
                pool = list(range(len(table.rows)))
            picked = rng.choice(len(pool), size=r_s, replace=False)
            subset = sorted(pool[i] for i in picked)
            pool = [r for i, r in enumerate(pool) if i not in set(picked.tolist())]
        else:
            subset = []
        try:
            raw = gen.generate(render_markdown_with_caption(table, subset), cfg.b)
        except Exception:
            log.warning("query generator failed on table %r (attempt %d)", table.id, attempts)
            continue
        collected.extend(filter_queries(raw, existing=collected))
    return [SyntheticQuery(text=t, table_id=table.id) for t in collected[: cfg.B]]


def render_markdown_with_caption(table: Table, row_subset=None) -> str:
    """Generator input: caption line (when present) above the markdown table."""
    body = render_markdown(table, row_subset)
    if table.caption:
        return f"{table.caption}\n\n{body}"
    return body


def build_query_pool(
    repo: Repository, gen: QueryGenerator, cfg: QueryGenConfig
) -> dict[str, list[SyntheticQuery]]:
    pool: dict[str, list[SyntheticQuery]] = {}
    for table in repo:
        queries = queries_for_table(table, gen, cfg)
        if len(queries) < cfg.B:
            log.info("table %r yielded %d/%d queries", table.id, len(queries), cfg.B)
        pool[table.id] = queries
    return pool
