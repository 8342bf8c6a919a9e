"""Table model, the two text views, markdown rendering, and JSONL ingestion."""

from __future__ import annotations

import json

import pytest
from hypothesis import given, strategies as st

from tabdex import (
    Repository,
    RepositoryFormatError,
    Table,
    ingest_repository,
    render_markdown,
    serialize_view1,
    serialize_view2,
    write_repository_jsonl,
)
from tabdex.tables import VIEW_SEPARATOR

from conftest import make_table


# ---------------------------------------------------------------------------
# model validation


def test_table_rejects_row_arity_mismatch():
    with pytest.raises(ValueError, match="row 1 has 1 cells, expected 2"):
        Table(id="t", caption=None, columns=["a", "b"], rows=[["1", "2"], ["3"]])


def test_table_allows_zero_rows():
    t = Table(id="t", caption="c", columns=["a"], rows=[])
    assert t.num_rows == 0


def test_repository_rejects_duplicate_ids():
    t1 = make_table("same")
    t2 = make_table("same")
    with pytest.raises(RepositoryFormatError, match="duplicate table id 'same'"):
        Repository(tables=[t1, t2])


def test_repository_get():
    repo = Repository(tables=[make_table("x"), make_table("y")])
    assert repo.get("y").id == "y"
    with pytest.raises(KeyError):
        repo.get("z")


# ---------------------------------------------------------------------------
# header view


def test_view1_caption_then_columns():
    t = Table(
        id="films",
        caption="On Golden Pond",
        columns=["Directed by", "Starring"],
        rows=[],
    )
    assert serialize_view1(t) == "On Golden Pond, Directed by, Starring"


def test_view1_skips_missing_caption():
    t = Table(id="t", caption=None, columns=["species", "wingspan"], rows=[])
    assert serialize_view1(t) == "species, wingspan"
    t2 = Table(id="t", caption="", columns=["species"], rows=[])
    assert serialize_view1(t2) == "species"


def test_view1_skips_empty_column_names():
    t = Table(id="t", caption="cap", columns=["a", "", "c"], rows=[])
    assert serialize_view1(t) == "cap, a, c"


# ---------------------------------------------------------------------------
# body view


def test_view2_single_row_pairs():
    t = Table(id="t", caption=None, columns=["A", "B"], rows=[["x", "y"]])
    assert serialize_view2(t) == "A: x, B: y"


def test_view2_is_row_major():
    t = Table(
        id="ports",
        caption=None,
        columns=["name", "tonnage"],
        rows=[["oslo", "120"], ["kiel", "88"]],
    )
    assert serialize_view2(t) == "name: oslo, tonnage: 120, name: kiel, tonnage: 88"


def test_view2_skips_empty_cells():
    t = Table(id="t", caption=None, columns=["A", "B"], rows=[["x", ""], ["", "y"]])
    assert serialize_view2(t) == "A: x, B: y"


def test_view2_bare_cell_for_empty_attribute():
    t = Table(id="t", caption=None, columns=["", "B"], rows=[["x", "y"]])
    assert serialize_view2(t) == "x, B: y"


def test_view2_empty_table_is_empty_string():
    t = Table(id="t", caption="cap", columns=["A"], rows=[])
    assert serialize_view2(t) == ""


# ---------------------------------------------------------------------------
# markdown


def test_markdown_minimal_shape():
    t = Table(id="t", caption=None, columns=["A"], rows=[["1"]])
    assert render_markdown(t) == "| A |\n| --- |\n| 1 |"


def test_markdown_multi_column():
    t = Table(id="t", caption=None, columns=["A", "B"], rows=[["1", "2"]])
    assert render_markdown(t) == "| A | B |\n| --- | --- |\n| 1 | 2 |"


def test_markdown_row_subset_preserves_order():
    t = Table(id="t", caption=None, columns=["A"], rows=[["r0"], ["r1"], ["r2"]])
    assert render_markdown(t, row_subset=[2, 0]) == "| A |\n| --- |\n| r2 |\n| r0 |"


def test_markdown_row_subset_out_of_range():
    t = Table(id="t", caption=None, columns=["A"], rows=[["r0"]])
    with pytest.raises(ValueError, match="row index 1 out of range"):
        render_markdown(t, row_subset=[1])


# ---------------------------------------------------------------------------
# JSONL ingestion


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def test_ingest_happy_path(tmp_path):
    path = tmp_path / "repo.jsonl"
    write_lines(
        path,
        [
            json.dumps(
                {
                    "id": "t1",
                    "caption": "one",
                    "columns": ["a"],
                    "rows": [["x"]],
                }
            ),
            json.dumps({"id": "t2", "caption": None, "columns": ["b"], "rows": []}),
        ],
    )
    repo = ingest_repository(path, batch_id=3)
    assert [t.id for t in repo] == ["t1", "t2"]
    assert repo.batch_id == 3
    assert repo.get("t2").caption is None


def test_ingest_skips_blank_lines(tmp_path):
    path = tmp_path / "repo.jsonl"
    path.write_text(
        '{"id": "t1", "caption": null, "columns": ["a"], "rows": []}\n\n',
        encoding="utf-8",
    )
    assert len(ingest_repository(path)) == 1


@pytest.mark.parametrize(
    "line,message",
    [
        ("not json", "line 2: invalid JSON"),
        ("[1, 2]", "line 2: expected a JSON object"),
        ('{"caption": null, "columns": ["a"], "rows": []}', "line 2: 'id' must be"),
        ('{"id": "", "columns": ["a"], "rows": []}', "line 2: 'id' must be"),
        ('{"id": "x", "caption": 7, "columns": ["a"], "rows": []}', "line 2: 'caption'"),
        ('{"id": "x", "caption": null, "columns": [], "rows": []}', "line 2: 'columns'"),
        ('{"id": "x", "caption": null, "columns": ["a", 1], "rows": []}', "line 2: 'columns'"),
        ('{"id": "x", "caption": null, "columns": ["a"], "rows": [[1]]}', "line 2: row 0"),
        (
            '{"id": "x", "caption": null, "columns": ["a"], "rows": [["1", "2"]]}',
            "line 2: row 0 has 2 cells, expected 1",
        ),
        ('{"id": "t1", "caption": null, "columns": ["a"], "rows": []}', "line 2: duplicate"),
    ],
)
def test_ingest_reports_line_numbers(tmp_path, line, message):
    path = tmp_path / "repo.jsonl"
    write_lines(
        path,
        ['{"id": "t1", "caption": null, "columns": ["a"], "rows": []}', line],
    )
    with pytest.raises(RepositoryFormatError, match=message):
        ingest_repository(path)


def test_write_then_ingest_round_trip(tmp_path, small_repo):
    path = tmp_path / "out.jsonl"
    write_repository_jsonl(small_repo, path)
    back = ingest_repository(path)
    assert len(back) == len(small_repo)
    for a, b in zip(small_repo, back):
        assert (a.id, a.caption, a.columns, a.rows) == (b.id, b.caption, b.columns, b.rows)


text_cells = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\n"),
    max_size=8,
)


@given(
    ids=st.lists(st.uuids().map(str), min_size=1, max_size=4, unique=True),
    columns=st.lists(text_cells, min_size=1, max_size=3),
    data=st.data(),
)
def test_round_trip_property(tmp_path_factory, ids, columns, data):
    tables = []
    for tid in ids:
        nrows = data.draw(st.integers(min_value=0, max_value=3))
        rows = [
            [data.draw(text_cells) for _ in columns] for _ in range(nrows)
        ]
        caption = data.draw(st.one_of(st.none(), text_cells))
        tables.append(Table(id=tid, caption=caption, columns=list(columns), rows=rows))
    repo = Repository(tables=tables)
    path = tmp_path_factory.mktemp("rt") / "repo.jsonl"
    write_repository_jsonl(repo, path)
    back = ingest_repository(path)
    for a, b in zip(repo, back):
        assert (a.id, a.caption, a.columns, a.rows) == (b.id, b.caption, b.columns, b.rows)


def test_view_separator_is_comma_space():
    assert VIEW_SEPARATOR == ", "
