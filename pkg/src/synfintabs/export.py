"""Serialisation of tables and dataset records.

On-disk layout under an output root::

    images/{id}.png          table cropped to its boundary
    images_a4/{id}.png       table on an A4 page (optional)
    annotations/{id}.json    html, csv, structure, qa pairs, split, ...
    manifest.jsonl           one line per record
"""

from __future__ import annotations

import csv
import html as html_lib
import io
import json
import os
from html.parser import HTMLParser
from pathlib import Path
from typing import Optional, Union

from .layout import A4_SIZE, ThemeStyle, to_virtual_coords
from .model import (
    BBox,
    Cell,
    CellBox,
    CellType,
    DatasetRecord,
    LayoutTree,
    Row,
    RowBox,
    Table,
    WordBox,
)

MANIFEST = "manifest.jsonl"


def _hex(c) -> str:
    return "#{:02x}{:02x}{:02x}".format(*c)


def _css(style: ThemeStyle) -> str:
    lines = [
        "table { border-collapse: collapse; font-family: '%s'; font-size: %dpt; }"
        % (style.typeface, style.font_size_pt),
        "td { white-space: nowrap; }",
    ]
    for t in CellType:
        pt, pr, pb, pl = style.padding[t]
        bt, br, bb, bl = style.borders[t]
        color = _hex(style.border_color)
        weight = "bold" if style.is_bold(t) else "normal"
        lines.append(
            f"td.{t.value} {{ padding: {pt}px {pr}px {pb}px {pl}px; text-align: {style.align[t]}; "
            f"font-weight: {weight}; border-style: solid; border-color: {color}; "
            f"border-width: {bt}px {br}px {bb}px {bl}px; "
            f"background: {_hex(style.backgrounds[t])}; color: {_hex(style.text_colors[t])}; }}"
        )
    return "\n".join(lines)


def to_html(table: Table, style: Optional[ThemeStyle] = None) -> str:
    """HTML document with ids ``row-{r}``, ``cell-{r}-{c}`` and ``word-{r}-{c}-{w}``."""
    out = ["<!DOCTYPE html>", "<html>", "<head>", '<meta charset="utf-8">']
    if style is not None:
        out += ["<style>", _css(style), "</style>"]
    out += ["</head>", "<body>", f'<table id="table" data-theme="{table.theme}">']
    for row in table.rows:
        out.append(f'<tr id="row-{row.row_index}">')
        for c, cell in enumerate(row.cells):
            span = f' colspan="{cell.colspan}"' if cell.colspan > 1 else ""
            words = " ".join(
                f'<span id="word-{row.row_index}-{c}-{k}">{html_lib.escape(w)}</span>'
                for k, w in enumerate(cell.words)
            )
            out.append(f'<td id="cell-{row.row_index}-{c}" class="{cell.cell_type.value}"{span}>{words}</td>')
        out.append("</tr>")
    out += ["</table>", "</body>", "</html>", ""]
    return "\n".join(out)


class _TableHTMLParser(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.ids: list[str] = []
        self.rows: list[list[tuple[int, list[str]]]] = []
        self._word: Optional[list[str]] = None

    def handle_starttag(self, tag, attrs):
        a = dict(attrs)
        if "id" in a:
            self.ids.append(a["id"])
        if tag == "tr":
            self.rows.append([])
        elif tag == "td":
            self.rows[-1].append((int(a.get("colspan", 1)), []))
        elif tag == "span":
            self._word = []

    def handle_endtag(self, tag):
        if tag == "span" and self._word is not None:
            self.rows[-1][-1][1].append("".join(self._word))
            self._word = None

    def handle_data(self, data):
        if self._word is not None:
            self._word.append(data)


def parse_html(document: str) -> tuple[list[list[str]], list[str]]:
    """Read back ``(text grid, element ids)`` from :func:`to_html` output."""
    p = _TableHTMLParser()
    p.feed(document)
    p.close()
    grid = []
    for row in p.rows:
        line = []
        for colspan, words in row:
            line.append(" ".join(words))
            line.extend([""] * (colspan - 1))
        grid.append(line)
    return grid, p.ids


def _box(b: BBox, page: tuple[int, int], virtual: bool) -> dict:
    d = {"bbox": b.as_list()}
    if virtual:
        d["virtual_bbox"] = list(to_virtual_coords(b, *page))
    return d


def structure_dict(table: Table, layout: LayoutTree, virtual: bool = True) -> dict:
    page = layout.page_size
    row_boxes = {r.row_index: r.bbox for r in layout.rows}
    cell_boxes = {(c.row_index, c.cell_index): c.bbox for c in layout.cells}
    word_boxes = {(w.row_index, w.cell_index, w.word_index): (i, w.bbox)
                  for i, w in enumerate(layout.words)}
    rows = []
    for row in table.rows:
        cells = []
        for c, cell in enumerate(row.cells):
            words = []
            for k, text in enumerate(cell.words):
                idx, wb = word_boxes[(row.row_index, c, k)]
                words.append({"text": text, "index": idx, **_box(wb, page, virtual)})
            cells.append({
                "cell_index": c,
                "column_index": cell.column_index,
                "colspan": cell.colspan,
                "type": cell.cell_type.value,
                "text": cell.text,
                **_box(cell_boxes[(row.row_index, c)], page, virtual),
                "words": words,
            })
        rows.append({
            "row_index": row.row_index,
            "section_index": row.section_index,
            **_box(row_boxes[row.row_index], page, virtual),
            "cells": cells,
        })
    return {
        "table_id": table.id,
        "theme": table.theme,
        "column_count": table.column_count,
        "currency_symbol": table.currency_symbol,
        "page_size": list(page),
        **_box(layout.table_box, page, virtual),
        "rows": rows,
    }


def to_structure_json(table: Table, layout: LayoutTree, virtual: bool = True) -> str:
    return json.dumps(structure_dict(table, layout, virtual), ensure_ascii=False)


def from_structure(data: Union[str, dict]) -> tuple[Table, LayoutTree]:
    """Rebuild the table and its layout from structure JSON."""
    d = json.loads(data) if isinstance(data, str) else data
    rows, row_boxes, cell_boxes, words = [], [], [], []
    for r in d["rows"]:
        cells = []
        for c in r["cells"]:
            cells.append(Cell(CellType(c["type"]), tuple(w["text"] for w in c["words"]),
                              c["column_index"], c["colspan"]))
            cell_boxes.append(CellBox(r["row_index"], c["cell_index"], BBox.from_list(c["bbox"])))
            for k, w in enumerate(c["words"]):
                words.append((w["index"], WordBox(w["text"], BBox.from_list(w["bbox"]),
                                                  r["row_index"], c["cell_index"], k)))
        rows.append(Row(tuple(cells), r["row_index"], r.get("section_index")))
        row_boxes.append(RowBox(r["row_index"], BBox.from_list(r["bbox"])))
    table = Table(d["table_id"], d["theme"], tuple(rows), d["column_count"], d.get("currency_symbol", ""))
    words.sort(key=lambda t: t[0])
    layout = LayoutTree(
        table_box=BBox.from_list(d["bbox"]),
        page_size=tuple(d["page_size"]),
        rows=tuple(row_boxes),
        cells=tuple(cell_boxes),
        words=tuple(w for _, w in words),
    )
    return table, layout


def structure_grid(data: Union[str, dict]) -> list[list[str]]:
    d = json.loads(data) if isinstance(data, str) else data
    grid = []
    for r in d["rows"]:
        line = [""] * d["column_count"]
        for c in r["cells"]:
            line[c["column_index"]] = " ".join(w["text"] for w in c["words"])
        grid.append(line)
    return grid


def to_csv(table: Table) -> str:
    """RFC 4180 CSV; spanning cells are padded with empty fields."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerows(table.text_grid())
    return buf.getvalue()


def parse_csv(text: str) -> list[list[str]]:
    return [row for row in csv.reader(io.StringIO(text, newline=""))]


def annotation_dict(record: DatasetRecord) -> dict:
    return {
        "id": record.id,
        "theme": record.theme,
        "split": record.split.value,
        "seed": record.seed,
        "html": record.html,
        "csv": record.csv,
        "structure": json.loads(record.structure_json),
        "a4": {
            "page_size": list(A4_SIZE),
            "offset": list(record.a4_offset),
            "scale": record.a4_scale,
        },
        "qa_pairs": [p.to_dict() for p in record.qa_pairs],
        "competition_pair": record.competition_pair,
    }


def record_paths(record_id: str, with_a4: bool = True) -> dict[str, str]:
    paths = {"image": f"images/{record_id}.png", "annotation": f"annotations/{record_id}.json"}
    if with_a4:
        paths["image_a4"] = f"images_a4/{record_id}.png"
    return paths


def _write_atomic(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_bytes(data)
        os.replace(tmp, path)
    except OSError:
        tmp.unlink(missing_ok=True)
        raise


def write_record_files(record: DatasetRecord, output_root: Union[str, Path], with_a4: bool = True) -> dict:
    """Write one record's images and annotation; return its manifest entry.

    On failure every file already written for the record is removed and the
    error is re-raised with the offending path.
    """
    root = Path(output_root)
    paths = record_paths(record.id, with_a4)
    payloads = {
        "image": record.image_png,
        "annotation": json.dumps(annotation_dict(record), ensure_ascii=False).encode("utf-8"),
    }
    if with_a4:
        payloads["image_a4"] = record.image_a4_png
    written = []
    current = None
    try:
        for key, rel in paths.items():
            current = root / rel
            current.parent.mkdir(parents=True, exist_ok=True)
            _write_atomic(current, payloads[key])
            written.append(current)
    except OSError as exc:
        for p in written:
            p.unlink(missing_ok=True)
        raise OSError(f"failed writing record {record.id} at {current}: {exc}") from exc
    return {"id": record.id, "theme": record.theme, "split": record.split.value, "paths": paths}


def append_manifest(output_root: Union[str, Path], entries) -> None:
    root = Path(output_root)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / MANIFEST, "a", encoding="utf-8", newline="\n") as fh:
        for e in entries:
            fh.write(json.dumps(e, ensure_ascii=False) + "\n")


def write_record(record: DatasetRecord, output_root: Union[str, Path], with_a4: bool = True) -> dict:
    entry = write_record_files(record, output_root, with_a4)
    append_manifest(output_root, [entry])
    return entry


def read_manifest(output_root: Union[str, Path]) -> list[dict]:
    path = Path(output_root) / MANIFEST
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def read_annotation(output_root: Union[str, Path], record_id: str) -> dict:
    with open(Path(output_root) / "annotations" / f"{record_id}.json", encoding="utf-8") as fh:
        return json.load(fh)
