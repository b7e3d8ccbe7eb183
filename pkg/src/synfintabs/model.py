"""Domain types shared by every stage of the pipeline.

Everything here is immutable. Constructors validate their own invariants;
:func:`validate_layout` checks the cross-object geometry of a laid-out table.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence


class SynFinTabsError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SynFinTabsError, ValueError):
    pass


class LayoutOverflowError(SynFinTabsError):
    """The laid-out table does not fit the page content area."""


class GenerationError(SynFinTabsError):
    pass


class LayoutValidationError(SynFinTabsError):
    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        head = "; ".join(self.problems[:5])
        more = f" (+{len(self.problems) - 5} more)" if len(self.problems) > 5 else ""
        super().__init__(f"invalid layout: {head}{more}")


@dataclass(frozen=True)
class BBox:
    """Integer pixel box, origin top-left.

    Coordinates are pixel edges: the box covers pixel columns ``x0 .. x1-1``
    and rows ``y0 .. y1-1``. Containment checks are inclusive.
    """

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        for name in ("x0", "y0", "x1", "y1"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise TypeError(f"BBox.{name} must be int, got {type(v).__name__}")
            if v < 0:
                raise ValueError(f"BBox.{name} must be >= 0, got {v}")
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"BBox needs positive area, got {self.as_list()}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    def as_list(self) -> list[int]:
        return [self.x0, self.y0, self.x1, self.y1]

    def contains(self, other: "BBox") -> bool:
        return (
            self.x0 <= other.x0
            and self.y0 <= other.y0
            and other.x1 <= self.x1
            and other.y1 <= self.y1
        )

    def interiors_overlap(self, other: "BBox") -> bool:
        return (
            self.x0 < other.x1
            and other.x0 < self.x1
            and self.y0 < other.y1
            and other.y0 < self.y1
        )

    def translate(self, dx: int, dy: int) -> "BBox":
        return BBox(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)

    @classmethod
    def from_list(cls, values: Sequence[int]) -> "BBox":
        x0, y0, x1, y1 = (int(v) for v in values)
        return cls(x0, y0, x1, y1)


class CellType(str, enum.Enum):
    SECTION_TITLE = "section_title"
    CURRENCY_UNIT = "currency_unit"
    ROW_HEADER = "row_header"
    COLUMN_HEADER = "column_header"
    DATA = "data"


class Split(str, enum.Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"


@dataclass(frozen=True)
class Cell:
    cell_type: CellType
    words: tuple[str, ...]
    column_index: int
    colspan: int = 1

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        if self.colspan < 1:
            raise ValueError(f"colspan must be >= 1, got {self.colspan}")
        if self.column_index < 0:
            raise ValueError(f"column_index must be >= 0, got {self.column_index}")
        for w in self.words:
            if not w or any(ch.isspace() for ch in w):
                raise ValueError(f"words must be non-empty and whitespace-free, got {w!r}")

    @property
    def text(self) -> str:
        return " ".join(self.words)

    @property
    def is_empty(self) -> bool:
        return not self.words


@dataclass(frozen=True)
class Row:
    cells: tuple[Cell, ...]
    row_index: int
    section_index: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))
        col = 0
        for cell in self.cells:
            if cell.column_index != col:
                raise ValueError(
                    f"row {self.row_index}: cell column_index {cell.column_index}, expected {col}"
                )
            col += cell.colspan

    @property
    def span(self) -> int:
        return sum(c.colspan for c in self.cells)

    @property
    def is_header(self) -> bool:
        return all(c.cell_type is CellType.COLUMN_HEADER for c in self.cells)

    @property
    def is_data(self) -> bool:
        return any(c.cell_type is CellType.DATA for c in self.cells)


@dataclass(frozen=True)
class Table:
    id: str
    theme: int
    rows: tuple[Row, ...]
    column_count: int
    currency_symbol: str = "£"

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        if not 0 <= self.theme <= 5:
            raise ValueError(f"theme must be in 0..5, got {self.theme}")
        for i, row in enumerate(self.rows):
            if row.row_index != i:
                raise ValueError(f"row at position {i} has row_index {row.row_index}")
            if row.span != self.column_count:
                raise ValueError(
                    f"row {i} spans {row.span} columns, table has {self.column_count}"
                )
        header_rows = [r.row_index for r in self.rows if r.is_header]
        if len(header_rows) != 1:
            raise ValueError(f"expected exactly one header row, found {len(header_rows)}")
        data_rows = [r for r in self.rows if r.is_data]
        if data_rows and data_rows[0].row_index < header_rows[0]:
            raise ValueError("header row must precede all data rows")
        for r in data_rows:
            if r.cells[0].cell_type is not CellType.ROW_HEADER:
                raise ValueError(f"data row {r.row_index} does not start with a row header")

    @property
    def header_row(self) -> Row:
        return next(r for r in self.rows if r.is_header)

    def iter_cells(self) -> Iterator[tuple[int, int, Cell]]:
        """Yield ``(row_index, position_in_row, cell)`` in reading order."""
        for row in self.rows:
            for c, cell in enumerate(row.cells):
                yield row.row_index, c, cell

    def flattened_words(self) -> list[str]:
        return [w for _, _, cell in self.iter_cells() for w in cell.words]

    def column_header_text(self, column_index: int) -> str:
        for cell in self.header_row.cells:
            if cell.column_index == column_index:
                return cell.text
        raise KeyError(column_index)

    def text_grid(self) -> list[list[str]]:
        """Cell texts expanded to ``column_count`` per row; spanned slots are empty."""
        grid = []
        for row in self.rows:
            line = [""] * self.column_count
            for cell in row.cells:
                line[cell.column_index] = cell.text
            grid.append(line)
        return grid


@dataclass(frozen=True)
class TableSpec:
    theme: int
    typeface: str
    font_size: int
    bold_headers: bool
    section_count: int
    rows_per_section: tuple[int, ...]
    value_column_count: int
    has_note_column: bool
    date_format: str
    section_numbering: bool
    currency_row: bool
    currency_symbol: str
    per_table_seed: int

    def __post_init__(self):
        object.__setattr__(self, "rows_per_section", tuple(self.rows_per_section))
        if len(self.rows_per_section) != self.section_count:
            raise ValueError("rows_per_section must have one entry per section")

    @property
    def column_count(self) -> int:
        return 1 + int(self.has_note_column) + self.value_column_count


@dataclass(frozen=True)
class RowBox:
    row_index: int
    bbox: BBox


@dataclass(frozen=True)
class CellBox:
    row_index: int
    cell_index: int
    bbox: BBox


@dataclass(frozen=True)
class WordBox:
    text: str
    bbox: BBox
    row_index: int
    cell_index: int
    word_index: int


@dataclass(frozen=True)
class LayoutTree:
    table_box: BBox
    page_size: tuple[int, int]
    rows: tuple[RowBox, ...]
    cells: tuple[CellBox, ...]
    words: tuple[WordBox, ...]

    def translate(self, dx: int, dy: int, page_size: tuple[int, int]) -> "LayoutTree":
        return LayoutTree(
            table_box=self.table_box.translate(dx, dy),
            page_size=page_size,
            rows=tuple(RowBox(r.row_index, r.bbox.translate(dx, dy)) for r in self.rows),
            cells=tuple(
                CellBox(c.row_index, c.cell_index, c.bbox.translate(dx, dy)) for c in self.cells
            ),
            words=tuple(
                WordBox(w.text, w.bbox.translate(dx, dy), w.row_index, w.cell_index, w.word_index)
                for w in self.words
            ),
        )

    def cell_box(self, row_index: int, cell_index: int) -> BBox:
        for c in self.cells:
            if c.row_index == row_index and c.cell_index == cell_index:
                return c.bbox
        raise KeyError((row_index, cell_index))


QUESTION_TEMPLATE = "What is the value of {row_key} for {column_key}?"


def make_question(row_key: str, column_key: str) -> str:
    return QUESTION_TEMPLATE.format(row_key=row_key, column_key=column_key)


def keys_unambiguous(row_key: str, column_key: str) -> bool:
    """True if each key occurs exactly once in the generated question."""
    q = make_question(row_key, column_key)
    return q.count(row_key) == 1 and q.count(column_key) == 1


@dataclass(frozen=True)
class QAPair:
    question: str
    answer_text: str
    row_key: str
    column_key: str
    start: int
    end: int

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValueError(f"span must satisfy 0 <= start < end, got ({self.start}, {self.end})")

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "answer": self.answer_text,
            "row_key": self.row_key,
            "column_key": self.column_key,
            "start_position": self.start,
            "end_position": self.end,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QAPair":
        return cls(
            question=d["question"],
            answer_text=d["answer"],
            row_key=d["row_key"],
            column_key=d["column_key"],
            start=int(d["start_position"]),
            end=int(d["end_position"]),
        )


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    theme: int
    split: Split
    table: Table
    layout: LayoutTree
    image_png: bytes
    image_a4_png: bytes
    a4_offset: tuple[int, int]
    a4_scale: float
    html: str
    structure_json: str
    csv: str
    qa_pairs: tuple[QAPair, ...]
    competition_pair: int
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "qa_pairs", tuple(self.qa_pairs))
        if not 0 <= self.competition_pair < len(self.qa_pairs):
            raise ValueError(
                f"competition_pair {self.competition_pair} out of range for "
                f"{len(self.qa_pairs)} pairs"
            )


def _check_disjoint(boxes: Sequence[BBox], label: str, problems: list[str]) -> None:
    for i, a in enumerate(boxes):
        for b in boxes[i + 1:]:
            if a.interiors_overlap(b):
                problems.append(f"{label}: {a.as_list()} overlaps {b.as_list()}")


def validate_layout(layout: LayoutTree, table: Optional[Table] = None) -> None:
    """Raise :class:`LayoutValidationError` unless the layout geometry is sound.

    Checks word ⊂ cell ⊂ row ⊂ table ⊂ page, pairwise-disjoint cells within a
    row and pairwise-disjoint rows. With ``table`` given, also checks that the
    flattened words match the table's words exactly.
    """
    problems: list[str] = []
    pw, ph = layout.page_size
    page = BBox(0, 0, pw, ph)
    if not page.contains(layout.table_box):
        problems.append(f"table box {layout.table_box.as_list()} outside page {pw}x{ph}")

    row_boxes = {r.row_index: r.bbox for r in layout.rows}
    if len(row_boxes) != len(layout.rows):
        problems.append("duplicate row indices")
    for r in layout.rows:
        if not layout.table_box.contains(r.bbox):
            problems.append(f"row {r.row_index} outside table box")
    _check_disjoint([r.bbox for r in layout.rows], "rows", problems)

    cell_boxes: dict[tuple[int, int], BBox] = {}
    per_row: dict[int, list[BBox]] = {}
    for c in layout.cells:
        key = (c.row_index, c.cell_index)
        if key in cell_boxes:
            problems.append(f"duplicate cell {key}")
        cell_boxes[key] = c.bbox
        rb = row_boxes.get(c.row_index)
        if rb is None:
            problems.append(f"cell {key} references missing row")
        elif not rb.contains(c.bbox):
            problems.append(f"cell {key} outside row {c.row_index}")
        per_row.setdefault(c.row_index, []).append(c.bbox)
    for r, boxes in per_row.items():
        _check_disjoint(boxes, f"cells of row {r}", problems)

    for i, w in enumerate(layout.words):
        cb = cell_boxes.get((w.row_index, w.cell_index))
        if cb is None:
            problems.append(f"word {i} references missing cell")
        elif not cb.contains(w.bbox):
            problems.append(f"word {i} {w.text!r} outside cell ({w.row_index}, {w.cell_index})")

    order = [(w.row_index, w.cell_index, w.word_index) for w in layout.words]
    if order != sorted(order):
        problems.append("words are not in reading order")

    if table is not None:
        expected_cells = sorted((r, c) for r, c, _ in table.iter_cells())
        if sorted(cell_boxes) != expected_cells:
            problems.append("cell set does not match table")
        if [w.text for w in layout.words] != table.flattened_words():
            problems.append("flattened words do not match table")

    if problems:
        raise LayoutValidationError(problems)
