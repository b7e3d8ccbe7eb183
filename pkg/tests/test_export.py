import json
import os

import pytest

from synfintabs.builder import TablePlan, generate_record
from synfintabs.export import (
    MANIFEST,
    from_structure,
    parse_csv,
    parse_html,
    read_annotation,
    read_manifest,
    structure_grid,
    to_csv,
    to_html,
    to_structure_json,
    write_record,
)
from synfintabs.layout import BUILTIN_STYLES, layout_table
from synfintabs.model import BBox, Cell, CellType, Row, Split, Table, validate_layout

from conftest import tiny_table


def test_minimal_html_ids():
    table = Table("t", 0, (Row((Cell(CellType.COLUMN_HEADER, ("x",), 0),), 0),), 1)
    _, ids = parse_html(to_html(table))
    assert {"row-0", "cell-0-0", "word-0-0-0"} <= set(ids)


def test_html_ids_unique_and_complete(laid_out):
    for table, style, _ in laid_out:
        grid, ids = parse_html(to_html(table, style))
        ids.remove("table")
        n_cells = sum(len(r.cells) for r in table.rows)
        n_words = len(table.flattened_words())
        assert len(ids) == len(set(ids)) == len(table.rows) + n_cells + n_words
        assert grid == table.text_grid()


def test_html_escapes_text():
    table = Table("t", 0, (Row((Cell(CellType.COLUMN_HEADER, ("<b>&",), 0),), 0),), 1)
    doc = to_html(table)
    assert "<b>&" not in doc
    assert parse_html(doc)[0] == [["<b>&"]]


def test_structure_schema_and_round_trip(laid_out):
    for table, _, layout in laid_out:
        d = json.loads(to_structure_json(table, layout))
        assert d["page_size"] == list(layout.page_size)
        for r in d["rows"]:
            for c in r["cells"]:
                assert {"type", "bbox", "virtual_bbox", "words", "text"} <= set(c)
                assert c["type"] in {t.value for t in CellType}
                for w in c["words"]:
                    assert {"text", "bbox", "virtual_bbox"} <= set(w)
        t2, l2 = from_structure(d)
        assert t2 == table and l2 == layout
        validate_layout(l2, t2)
        assert structure_grid(d) == table.text_grid()
    d = json.loads(to_structure_json(table, layout, virtual=False))
    assert "virtual_bbox" not in d["rows"][0]


def test_empty_cells_keep_boxes(metrics):
    table = tiny_table(value="")
    d = json.loads(to_structure_json(table, layout_table(table, BUILTIN_STYLES[0], metrics)))
    cell = d["rows"][2]["cells"][1]
    assert cell["words"] == [] and BBox.from_list(cell["bbox"])


def test_csv_quoting():
    table = tiny_table(value="(1,839)")
    text = to_csv(table)
    assert '"(1,839)"' in text
    assert text.split("\r\n")[0] == ",30.11.74"
    assert text.split("\r\n")[1] == "Fixed assets,"
    assert parse_csv(text) == table.text_grid()


def test_csv_field_counts(laid_out):
    for table, _, _ in laid_out:
        rows = parse_csv(to_csv(table))
        assert all(len(r) == table.column_count for r in rows)
        assert rows == table.text_grid()


def test_write_record_layout(tmp_path, config):
    record = generate_record(TablePlan(3, 2, Split.TEST), config)
    entry = write_record(record, tmp_path)
    assert entry == {
        "id": "000003", "theme": 2, "split": "test",
        "paths": {"image": "images/000003.png", "annotation": "annotations/000003.json",
                  "image_a4": "images_a4/000003.png"},
    }
    files = sorted(str(p.relative_to(tmp_path)) for p in tmp_path.rglob("*") if p.is_file())
    assert files == ["annotations/000003.json", "images/000003.png", "images_a4/000003.png", MANIFEST]
    assert read_manifest(tmp_path) == [entry]
    ann = read_annotation(tmp_path, "000003")
    assert {"id", "theme", "split", "html", "csv", "structure", "qa_pairs", "competition_pair", "a4"} <= set(ann)
    assert ann["qa_pairs"][0].keys() == {"question", "answer", "row_key", "column_key",
                                         "start_position", "end_position"}


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_write_failure_cleans_up(tmp_path, config):
    record = generate_record(TablePlan(1, 0, Split.TRAIN), config)
    (tmp_path / "images_a4").mkdir()
    os.chmod(tmp_path / "images_a4", 0o500)
    try:
        with pytest.raises(OSError, match="images_a4"):
            write_record(record, tmp_path)
    finally:
        os.chmod(tmp_path / "images_a4", 0o700)
    assert not any(p.is_file() for p in tmp_path.rglob("*"))


def test_write_failure_cleans_up_blocked_path(tmp_path, config):
    # a directory squatting on the a4 image path makes the final write fail
    record = generate_record(TablePlan(1, 0, Split.TRAIN), config)
    (tmp_path / "images_a4" / "000001.png").mkdir(parents=True)
    with pytest.raises(OSError, match="000001"):
        write_record(record, tmp_path)
    assert not any(p.is_file() for p in tmp_path.rglob("*"))
