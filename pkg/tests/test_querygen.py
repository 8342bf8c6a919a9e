"""Synthetic query generation: templates, filtering, and row sampling."""

from __future__ import annotations

import numpy as np
import pytest

from tabdex import (
    QueryGenConfig,
    Table,
    TemplateQueryGenerator,
    filter_queries,
    queries_for_table,
)
from tabdex.querygen import (
    QUESTION_PREFIX,
    SyntheticQuery,
    _parse_markdown,
    build_query_pool,
    render_markdown_with_caption,
)

from conftest import make_table


# ---------------------------------------------------------------------------
# filtering


def test_filter_keeps_only_prefixed_lines():
    raw = ["Question: alpha?", "alpha?", "note: beta?", "Question: beta?"]
    assert filter_queries(raw) == ["alpha?", "beta?"]


def test_filter_drops_empty_remainder():
    assert filter_queries(["Question: ", "Question: x"]) == ["x"]


def test_filter_deduplicates_and_respects_existing():
    raw = ["Question: a", "Question: a", "Question: b"]
    assert filter_queries(raw) == ["a", "b"]
    assert filter_queries(raw, existing=["a"]) == ["b"]


def test_filter_prefix_must_match_exactly():
    assert filter_queries(["question: a", "QUESTION: a", " Question: a"]) == []


# ---------------------------------------------------------------------------
# config


def test_config_validation_and_attempt_cap():
    with pytest.raises(ValueError):
        QueryGenConfig(B=2, b=5)
    with pytest.raises(ValueError):
        QueryGenConfig(B=5, b=0)
    cfg = QueryGenConfig(B=20, b=5)
    assert cfg.max_attempts == 16
    assert QueryGenConfig(B=20, b=5, max_attempts=3).max_attempts == 3


# ---------------------------------------------------------------------------
# markdown round trip into the generator


def test_render_markdown_with_caption():
    t = Table(id="t", caption="tides", columns=["A"], rows=[["1"]])
    assert render_markdown_with_caption(t) == "tides\n\n| A |\n| --- |\n| 1 |"


def test_render_markdown_without_caption():
    t = Table(id="t", caption=None, columns=["A"], rows=[["1"]])
    assert render_markdown_with_caption(t) == "| A |\n| --- |\n| 1 |"


def test_parse_markdown_recovers_caption_columns_rows():
    text = "tides today\n\n| A | B |\n| --- | --- |\n| 1 | 2 |"
    caption, columns, rows = _parse_markdown(text)
    assert caption == "tides today"
    assert columns == ["A", "B"]
    assert rows == [["1", "2"]]


def test_parse_markdown_requires_a_table():
    with pytest.raises(ValueError, match="no markdown table"):
        _parse_markdown("just prose")


# ---------------------------------------------------------------------------
# template generator


def gen_table():
    return Table(
        id="ports",
        caption="harbor register",
        columns=["name", "tonnage"],
        rows=[["oslo", "120"], ["kiel", "88"]],
    )


def test_generator_is_deterministic():
    gen = TemplateQueryGenerator(seed=3)
    text = render_markdown_with_caption(gen_table())
    assert gen.generate(text, 5) == gen.generate(text, 5)
    assert gen.generate(text, 5) != TemplateQueryGenerator(seed=4).generate(text, 5)


def test_generator_output_shape():
    gen = TemplateQueryGenerator(seed=3)
    out = gen.generate(render_markdown_with_caption(gen_table()), 6)
    assert len(out) == 6
    for line in out:
        assert line.startswith(QUESTION_PREFIX)
        assert line.endswith("?")
        assert "in harbor register" in line


def test_generator_without_caption_omits_in_clause():
    t = Table(id="t", caption=None, columns=["name", "tonnage"], rows=[["oslo", "120"]])
    out = TemplateQueryGenerator(seed=0).generate(render_markdown_with_caption(t), 4)
    assert all(" in " not in line for line in out)


def test_generator_zero_row_table_lists_attributes():
    t = Table(id="t", caption="empty set", columns=["name"], rows=[])
    out = TemplateQueryGenerator(seed=0).generate(render_markdown_with_caption(t), 3)
    assert out == ["Question: which name values are listed in empty set?"] * 3


def test_generator_single_column_uses_it_for_both_roles():
    t = Table(id="t", caption=None, columns=["name"], rows=[["oslo"]])
    out = TemplateQueryGenerator(seed=1).generate(render_markdown_with_caption(t), 8)
    for line in out:
        assert "name" in line


def test_aggregation_share_is_about_one_fifth():
    gen = TemplateQueryGenerator(seed=9)
    text = render_markdown_with_caption(gen_table())
    out = gen.generate(text, 4000)
    frac = sum("how many rows" in q for q in out) / len(out)
    assert 0.15 <= frac <= 0.25


# ---------------------------------------------------------------------------
# row sampling (queries_for_table)


class RecordingGenerator:
    """Echoes each rendered row back as a distinct query, recording inputs."""

    def __init__(self):
        self.markdowns: list[str] = []

    def generate(self, markdown_table: str, b: int) -> list[str]:
        self.markdowns.append(markdown_table)
        _, _, rows = _parse_markdown(markdown_table)
        out = [f"{QUESTION_PREFIX}row {' '.join(r)}?" for r in rows]
        while len(out) < b:
            out.append(f"{QUESTION_PREFIX}pad {len(self.markdowns)} {len(out)}?")
        return out[:b]


def wide_table(m):
    return Table(
        id="wide",
        caption=None,
        columns=["c"],
        rows=[[f"r{i:02d}"] for i in range(m)],
    )


def test_row_batches_partition_the_table():
    # m=20 rows with B=20, b=5 makes 4 batches of r_s=5 rows; the pool
    # never resets mid-cycle, so the batches are disjoint and cover all rows
    gen = RecordingGenerator()
    queries = queries_for_table(wide_table(20), gen, QueryGenConfig(B=20, b=5, seed=0))
    assert len(queries) == 20
    batches = []
    for md in gen.markdowns[:4]:
        _, _, rows = _parse_markdown(md)
        batches.append({r[0] for r in rows})
    assert all(len(b) == 5 for b in batches)
    assert set.union(*batches) == {f"r{i:02d}" for i in range(20)}
    for i in range(4):
        for j in range(i + 1, 4):
            assert not batches[i] & batches[j]


def test_row_subsets_are_rendered_in_index_order():
    gen = RecordingGenerator()
    queries_for_table(wide_table(12), gen, QueryGenConfig(B=4, b=2, seed=5))
    for md in gen.markdowns:
        _, _, rows = _parse_markdown(md)
        labels = [r[0] for r in rows]
        assert labels == sorted(labels)


def test_short_table_pool_resets():
    gen = RecordingGenerator()
    queries = queries_for_table(wide_table(3), gen, QueryGenConfig(B=20, b=5, seed=1))
    # every batch is a single row (r_s = max(1, 3 // 4) = 1) and rows repeat
    # across batches once the pool runs dry
    seen = []
    for md in gen.markdowns:
        _, _, rows = _parse_markdown(md)
        assert len(rows) == 1
        seen.append(rows[0][0])
    assert set(seen) == {"r00", "r01", "r02"}
    assert len(queries) <= 20


def test_truncates_to_budget():
    gen = RecordingGenerator()
    queries = queries_for_table(wide_table(20), gen, QueryGenConfig(B=7, b=5, seed=0))
    assert len(queries) == 7
    assert all(isinstance(q, SyntheticQuery) and q.table_id == "wide" for q in queries)


def test_generator_failures_are_skipped(caplog):
    class FlakyGenerator:
        def __init__(self):
            self.calls = 0

        def generate(self, markdown_table: str, b: int) -> list[str]:
            self.calls += 1
            if self.calls % 2 == 1:
                raise RuntimeError("model hiccup")
            return [f"{QUESTION_PREFIX}q{self.calls}-{i}?" for i in range(b)]

    with caplog.at_level("WARNING"):
        queries = queries_for_table(wide_table(6), FlakyGenerator(), QueryGenConfig(B=4, b=2, seed=0))
    assert len(queries) == 4
    assert any("query generator failed" in r.message for r in caplog.records)


def test_attempt_cap_bounds_work():
    class DeadGenerator:
        def generate(self, markdown_table: str, b: int) -> list[str]:
            return ["no prefix here"]

    queries = queries_for_table(wide_table(4), DeadGenerator(), QueryGenConfig(B=4, b=2, seed=0))
    assert queries == []


def test_queries_deterministic_per_table_id():
    cfg = QueryGenConfig(B=6, b=3, seed=42)
    gen = TemplateQueryGenerator(seed=42)
    t = gen_table()
    a = queries_for_table(t, gen, cfg)
    b = queries_for_table(t, gen, cfg)
    assert a == b


def test_build_query_pool_covers_repo(small_repo, caplog):
    cfg = QueryGenConfig(B=4, b=2, seed=0)
    with caplog.at_level("INFO"):
        pool = build_query_pool(small_repo, TemplateQueryGenerator(seed=0), cfg)
    assert set(pool) == {"films", "ports", "birds"}
    for queries in pool.values():
        assert len(queries) <= 4
