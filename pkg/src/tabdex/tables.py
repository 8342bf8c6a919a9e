"""Tables, repositories, and the text views used to embed them.

A table is rendered into two flat strings before embedding: a header view
(caption plus attribute names) and a body view (row-major attribute/cell
pairs). Both views join their elements with ", " and silently skip missing
pieces instead of emitting placeholders.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import RepositoryFormatError

VIEW_SEPARATOR = ", "
PAIR_BINDING = ": "


@dataclass
class Table:
    id: str
    caption: str | None
    columns: list[str]
    rows: list[list[str]]

    def __post_init__(self) -> None:
        width = len(self.columns)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise ValueError(
                    f"table {self.id!r}: row {i} has {len(row)} cells, expected {width}"
                )

    @property
    def num_rows(self) -> int:
        return len(self.rows)


@dataclass
class Repository:
    """An ordered batch of tables with unique ids."""

    tables: list[Table] = field(default_factory=list)
    batch_id: int = 0

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for t in self.tables:
            if t.id in seen:
                raise RepositoryFormatError(f"duplicate table id {t.id!r}")
            seen.add(t.id)

    def __len__(self) -> int:
        return len(self.tables)

    def __iter__(self):
        return iter(self.tables)

    def get(self, table_id: str) -> Table:
        for t in self.tables:
            if t.id == table_id:
                return t
        raise KeyError(table_id)


def serialize_view1(table: Table) -> str:
    """Header view: caption followed by attribute names, comma-joined."""
    parts = []
    if table.caption:
        parts.append(table.caption)
    parts.extend(col for col in table.columns if col)
    return VIEW_SEPARATOR.join(parts)


def serialize_view2(table: Table) -> str:
    """Body view: row-major "attribute: cell" pairs, comma-joined.

    Pairs with an empty cell are dropped. A pair with an empty attribute
    name but a non-empty cell degrades to the bare cell text.
    """
    parts = []
    for row in table.rows:
        for col, cell in zip(table.columns, row):
            if not cell:
                continue
            parts.append(f"{col}{PAIR_BINDING}{cell}" if col else cell)
    return VIEW_SEPARATOR.join(parts)


def render_markdown(table: Table, row_subset: Sequence[int] | None = None) -> str:
    """Pipe-delimited markdown with a header row and separator row.

    ``row_subset`` selects rows by index (order preserved); out-of-range
    indices raise ValueError.
    """
    if row_subset is None:
        rows = table.rows
    else:
        for i in row_subset:
            if not 0 <= i < len(table.rows):
                raise ValueError(
                    f"table {table.id!r}: row index {i} out of range [0, {len(table.rows)})"
                )
        rows = [table.rows[i] for i in row_subset]
    lines = [_md_row(table.columns), _md_row(["---"] * len(table.columns))]
    lines.extend(_md_row(row) for row in rows)
    return "\n".join(lines)


def _md_row(cells: Iterable[str]) -> str:
    return "| " + " | ".join(cells) + " |"


def ingest_repository(path: str | Path, batch_id: int = 0) -> Repository:
    """Load a JSON-lines repository file.

    One object per line with fields ``id`` (string), ``caption`` (string or
    null), ``columns`` (non-empty array of strings), ``rows`` (array of
    arrays of strings, each row as wide as ``columns``). Validation errors
    carry the 1-based line number.
    """
    tables: list[Table] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RepositoryFormatError(f"invalid JSON ({exc.msg})", lineno) from exc
            tables.append(_table_from_record(record, lineno, seen))
    return Repository(tables=tables, batch_id=batch_id)


def _table_from_record(record: object, lineno: int, seen: set[str]) -> Table:
    if not isinstance(record, dict):
        raise RepositoryFormatError("expected a JSON object", lineno)
    table_id = record.get("id")
    if not isinstance(table_id, str) or not table_id:
        raise RepositoryFormatError("'id' must be a non-empty string", lineno)
    if table_id in seen:
        raise RepositoryFormatError(f"duplicate table id {table_id!r}", lineno)
    caption = record.get("caption")
    if caption is not None and not isinstance(caption, str):
        raise RepositoryFormatError("'caption' must be a string or null", lineno)
    columns = record.get("columns")
    if (
        not isinstance(columns, list)
        or not columns
        or any(not isinstance(c, str) for c in columns)
    ):
        raise RepositoryFormatError("'columns' must be a non-empty array of strings", lineno)
    rows = record.get("rows")
    if rows is None:
        rows = []
    if not isinstance(rows, list):
        raise RepositoryFormatError("'rows' must be an array", lineno)
    for i, row in enumerate(rows):
        if not isinstance(row, list) or any(not isinstance(c, str) for c in row):
            raise RepositoryFormatError(f"row {i} must be an array of strings", lineno)
        if len(row) != len(columns):
            raise RepositoryFormatError(
                f"row {i} has {len(row)} cells, expected {len(columns)}", lineno
            )
    seen.add(table_id)
    return Table(id=table_id, caption=caption, columns=list(columns), rows=[list(r) for r in rows])


def write_repository_jsonl(repo: Repository, path: str | Path) -> None:
    """Inverse of :func:`ingest_repository`; one compact object per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for t in repo:
            record = {"id": t.id, "caption": t.caption, "columns": t.columns, "rows": t.rows}
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
