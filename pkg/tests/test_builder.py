import hashlib
import json
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from synfintabs.builder import (
    RETRY_INDEX_BASE,
    TablePlan,
    assign_split,
    attempt_seed,
    build_dataset,
    build_table,
    plan_dataset,
    split_counts,
    stats,
)
from synfintabs.export import MANIFEST, read_annotation, read_manifest
from synfintabs.model import CellType, GenerationError, Split
from synfintabs.sampler import GeneratorConfig, derive_table_seed

from conftest import SMALL_TOTAL


def counts(total):
    c = Counter(assign_split(i, total) for i in range(total))
    return c[Split.TRAIN], c[Split.VALIDATION], c[Split.TEST]


def test_split_examples():
    assert counts(12_000) == (9_600, 1_200, 1_200)
    assert counts(10) == (8, 1, 1)
    # floors 5/0/0 leave 2 units; remainders .6/.7/.7 send them to validation and test
    assert counts(7) == (5, 1, 1)
    assert counts(1) == (1, 0, 0)
    assert counts(2) == (2, 0, 0)
    with pytest.raises(ValueError):
        assign_split(3, 3)


@settings(deadline=None, max_examples=50)
@given(st.integers(1, 3000))
def test_split_quotas_are_prefix_blocks(total):
    splits = [assign_split(i, total) for i in range(total)]
    order = {Split.TRAIN: 0, Split.VALIDATION: 1, Split.TEST: 2}
    assert [order[s] for s in splits] == sorted(order[s] for s in splits)
    assert sum(split_counts(total).values()) == total


def test_plan_is_stratified_and_stable():
    cfg = GeneratorConfig(master_seed=42)
    plans = plan_dataset(cfg, 1000)
    assert plans == plan_dataset(cfg, 1000)
    by = Counter((p.theme, p.split) for p in plans)
    for t, n in enumerate([400] + [120] * 5):
        assert (by[(t, Split.TRAIN)], by[(t, Split.VALIDATION)], by[(t, Split.TEST)]) == \
            (n * 8 // 10, n // 10, n // 10)
    assert plan_dataset(GeneratorConfig(master_seed=43), 1000) != plans
    with pytest.raises(ValueError):
        plan_dataset(cfg, 0)


def test_retry_seeds_are_disjoint():
    firsts = {derive_table_seed(5, i) for i in range(5000)}
    retries = {attempt_seed(5, i, a) for i in range(200) for a in range(1, 21)}
    assert not firsts & retries
    assert attempt_seed(5, 9, 0) == derive_table_seed(5, 9)
    assert attempt_seed(5, 9, 1) == derive_table_seed(5, RETRY_INDEX_BASE + 9 * 1024 + 1)


def test_rejections_regenerate_with_retry_seeds():
    # every data cell empty: each attempt yields zero QA pairs
    cfg = GeneratorConfig(empty_cell_probability=1.0, note_column_probability=0.0, max_retries=3)
    with pytest.raises(GenerationError, match="seed"):
        build_table(TablePlan(0, 0, Split.TRAIN), cfg)
    cfg = GeneratorConfig(empty_cell_probability=0.9, note_column_probability=0.0, max_retries=50,
                          value_columns=(1, 1), sections=(1, 1), rows_per_section=(2, 2))
    built = [build_table(TablePlan(i, 0, Split.TRAIN), cfg) for i in range(10)]
    assert any(b.seed != derive_table_seed(0, i) for i, b in enumerate(built))
    assert all(b.qa_pairs for b in built)


def test_oversized_tables_shrink_or_retry():
    # ~40 rows do not fit at the sampled size but do at a smaller one
    cfg = GeneratorConfig(rows_per_section=(20, 20), sections=(2, 2), max_retries=5)
    b = build_table(TablePlan(0, 5, Split.TRAIN), cfg)
    assert b.layout.table_box.height <= 1123 - 80
    assert b.style.font_size_pt < 9
    huge = GeneratorConfig(rows_per_section=(60, 60), sections=(3, 3), max_retries=2)
    with pytest.raises(GenerationError, match="even at 7pt"):
        build_table(TablePlan(0, 5, Split.TRAIN), huge)


def tree_hash(root):
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode() + b"\0" + p.read_bytes())
    return h.hexdigest()


def test_workers_do_not_change_output(tmp_path, small_dataset, config):
    build_dataset(config, SMALL_TOTAL, tmp_path / "w3", worker_count=3)
    assert tree_hash(tmp_path / "w3") == tree_hash(small_dataset)


def test_refuses_existing_manifest(small_dataset, config):
    with pytest.raises(FileExistsError):
        build_dataset(config, 5, small_dataset)


def test_summary_matches_filesystem(small_dataset):
    summary = json.loads((small_dataset / "summary.json").read_text())
    entries = read_manifest(small_dataset)
    assert summary["total"] == len(entries) == SMALL_TOTAL
    recount = Counter(read_annotation(small_dataset, e["id"])["split"] for e in entries)
    assert summary["splits"] == {s: recount.get(s, 0) for s in ("train", "validation", "test")}
    themes = Counter(str(read_annotation(small_dataset, e["id"])["theme"]) for e in entries)
    assert summary["themes"] == {str(t): themes.get(str(t), 0) for t in range(6)}
    assert len(list((small_dataset / "images").glob("*.png"))) == SMALL_TOTAL


def test_stats_recount(small_dataset):
    report = stats(small_dataset)
    assert report["total"] == SMALL_TOTAL
    non_empty = 0
    for e in read_manifest(small_dataset):
        s = read_annotation(small_dataset, e["id"])["structure"]
        non_empty += sum(1 for r in s["rows"] for c in r["cells"] if c["type"] == CellType.DATA.value and c["words"])
    assert report["qa_pairs_total"] == non_empty
    assert sum(report["rows_per_table"]["histogram"].values()) == SMALL_TOTAL
    assert 0 < report["negative_value_rate"] < 0.5
    assert report["missing_files"] == {}


def test_stats_empty_and_missing(tmp_path, small_dataset):
    empty = stats(tmp_path)
    assert empty["total"] == 0 and empty["qa_pairs_total"] == 0
    assert empty["rows_per_table"] == {"min": 0, "max": 0, "mean": 0.0, "histogram": {}}
    (tmp_path / MANIFEST).write_text("")
    assert stats(tmp_path)["total"] == 0

    broken = tmp_path / "broken"
    broken.mkdir()
    (broken / MANIFEST).write_text((small_dataset / MANIFEST).read_text())
    report = stats(broken)
    assert len(report["missing_files"]) == SMALL_TOTAL
    assert report["total"] == SMALL_TOTAL
