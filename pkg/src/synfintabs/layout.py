"""Pixel geometry for tables.

The layout is computed directly from font metrics rather than measured from a
rendered page, so every annotation box is exact by construction.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Union

import yaml

from .fonts import points_to_pixels
from .model import (
    BBox,
    CellBox,
    CellType,
    ConfigError,
    LayoutOverflowError,
    LayoutTree,
    RowBox,
    Table,
    TableSpec,
    WordBox,
)

A4_SIZE = (794, 1123)  # A4 at 96 px/inch
A4_MARGIN = 40
VIRTUAL_EXTENT = 1000

Color = tuple[int, int, int]
Edges = tuple[int, int, int, int]  # top, right, bottom, left


class PageMode(str, enum.Enum):
    TABLE_BOUNDARY = "table_boundary"
    A4_PAGE = "a4_page"


class FontMetricsProvider(Protocol):
    def text_width(self, text: str, typeface: str, size_px: int, bold: bool = False) -> int: ...

    def line_height(self, typeface: str, size_px: int, bold: bool = False) -> int: ...


def _all_types(value) -> dict[CellType, object]:
    return {t: value for t in CellType}


@dataclass(frozen=True)
class ThemeStyle:
    theme: int
    typeface: str = "DejaVu Sans"
    font_size_pt: int = 10
    bold_headers: bool = True
    bold_section_titles: bool = True
    padding: dict[CellType, Edges] = field(default_factory=lambda: _all_types((3, 8, 3, 8)))
    borders: dict[CellType, Edges] = field(default_factory=lambda: _all_types((0, 0, 0, 0)))
    border_color: Color = (0, 0, 0)
    backgrounds: dict[CellType, Color] = field(default_factory=lambda: _all_types((255, 255, 255)))
    text_colors: dict[CellType, Color] = field(default_factory=lambda: _all_types((0, 0, 0)))
    stripe_color: Optional[Color] = None
    align: dict[CellType, str] = field(default_factory=lambda: {
        CellType.SECTION_TITLE: "left",
        CellType.CURRENCY_UNIT: "right",
        CellType.ROW_HEADER: "left",
        CellType.COLUMN_HEADER: "left",
        CellType.DATA: "right",
    })
    page_background: Color = (255, 255, 255)

    @property
    def font_size_px(self) -> int:
        return points_to_pixels(self.font_size_pt)

    def is_bold(self, cell_type: CellType) -> bool:
        if cell_type is CellType.COLUMN_HEADER:
            return self.bold_headers
        if cell_type is CellType.SECTION_TITLE:
            return self.bold_section_titles
        return False

    def for_spec(self, spec: TableSpec) -> "ThemeStyle":
        return dataclasses.replace(
            self, typeface=spec.typeface, font_size_pt=spec.font_size, bold_headers=spec.bold_headers
        )

    def to_dict(self) -> dict:
        def per_type(d):
            return {t.value: list(v) if isinstance(v, tuple) else v for t, v in d.items()}

        return {
            "theme": self.theme,
            "typeface": self.typeface,
            "font_size_pt": self.font_size_pt,
            "bold_headers": self.bold_headers,
            "bold_section_titles": self.bold_section_titles,
            "padding": per_type(self.padding),
            "borders": per_type(self.borders),
            "border_color": _hex(self.border_color),
            "backgrounds": {t.value: _hex(c) for t, c in self.backgrounds.items()},
            "text_colors": {t.value: _hex(c) for t, c in self.text_colors.items()},
            "stripe_color": _hex(self.stripe_color) if self.stripe_color else None,
            "align": per_type(self.align),
            "page_background": _hex(self.page_background),
        }

    @classmethod
    def from_dict(cls, d: dict, base: Optional["ThemeStyle"] = None) -> "ThemeStyle":
        """Build a style from a (possibly partial) mapping layered over ``base``."""
        base = base or cls(theme=int(d.get("theme", 0)))
        kw: dict = {}
        for key in ("theme", "typeface", "font_size_pt", "bold_headers", "bold_section_titles"):
            if key in d:
                kw[key] = d[key]
        for key, conv in (("padding", _edges), ("borders", _edges),
                          ("backgrounds", _color), ("text_colors", _color), ("align", _align)):
            if key in d:
                merged = dict(getattr(base, key))
                for t, v in d[key].items():
                    merged[CellType(t)] = conv(v)
                kw[key] = merged
        for key in ("border_color", "page_background"):
            if key in d:
                kw[key] = _color(d[key])
        if "stripe_color" in d:
            kw["stripe_color"] = _color(d["stripe_color"]) if d["stripe_color"] else None
        return dataclasses.replace(base, **kw)


def _hex(c: Color) -> str:
    return "#{:02x}{:02x}{:02x}".format(*c)


def _color(v) -> Color:
    if isinstance(v, str):
        s = v.lstrip("#")
        if len(s) != 6:
            raise ConfigError(f"bad colour {v!r}")
        return (int(s[0:2], 16), int(s[2:4], 16), int(s[4:6], 16))
    r, g, b = (int(x) for x in v)
    return (r, g, b)


def _edges(v) -> Edges:
    if isinstance(v, int):
        return (v, v, v, v)
    t, r, b, l = (int(x) for x in v)
    if min(t, r, b, l) < 0:
        raise ConfigError(f"edge widths must be >= 0, got {v}")
    return (t, r, b, l)


def _align(v) -> str:
    if v not in ("left", "right"):
        raise ConfigError(f"alignment must be 'left' or 'right', got {v!r}")
    return v


def _builtin_styles() -> dict[int, ThemeStyle]:
    ct = CellType
    white = (255, 255, 255)
    none = (0, 0, 0, 0)

    def types(default, **over):
        d = _all_types(default)
        for name, v in over.items():
            d[ct[name.upper()]] = v
        return d

    return {
        # Companies House filings: plain page, rule under the year headers
        0: ThemeStyle(
            theme=0,
            padding=types((3, 10, 3, 10)),
            borders=types(none, column_header=(0, 0, 1, 0)),
        ),
        # spreadsheet with light gridlines and grey header band
        1: ThemeStyle(
            theme=1,
            padding=types((4, 8, 4, 8)),
            borders=types((1, 1, 1, 1)),
            border_color=(191, 191, 191),
            backgrounds=types(white, column_header=(217, 217, 217), currency_unit=(242, 242, 242)),
        ),
        # blue header band with white text, banded rows
        2: ThemeStyle(
            theme=2,
            padding=types((4, 8, 4, 8)),
            borders=types(none, column_header=(0, 0, 2, 0), section_title=(0, 0, 1, 0)),
            border_color=(47, 84, 150),
            backgrounds=types(white, column_header=(68, 114, 196), section_title=(180, 198, 231)),
            text_colors=types((0, 0, 0), column_header=white),
            stripe_color=(217, 225, 242),
        ),
        # green accents, horizontal rules only
        3: ThemeStyle(
            theme=3,
            padding=types((3, 9, 3, 9)),
            borders=types((0, 0, 1, 0)),
            border_color=(169, 208, 142),
            backgrounds=types(white, column_header=(226, 239, 218), section_title=(198, 224, 180)),
        ),
        # dark header, full grid, zebra stripes
        4: ThemeStyle(
            theme=4,
            padding=types((4, 7, 4, 7)),
            borders=types((1, 1, 1, 1)),
            border_color=(128, 128, 128),
            backgrounds=types(white, column_header=(64, 64, 64)),
            text_colors=types((0, 0, 0), column_header=white),
            stripe_color=(242, 242, 242),
        ),
        # annual-report look: coloured titles, thin separators
        5: ThemeStyle(
            theme=5,
            typeface="DejaVu Serif",
            padding=types((4, 12, 4, 12)),
            borders=types((0, 0, 1, 0), column_header=(0, 0, 2, 0), section_title=none),
            border_color=(191, 191, 191),
            text_colors=types((38, 38, 38), section_title=(0, 51, 102), column_header=(0, 51, 102)),
        ),
    }


BUILTIN_STYLES: dict[int, ThemeStyle] = _builtin_styles()


def load_styles(path: Union[str, Path]) -> dict[int, ThemeStyle]:
    """Built-in styles with overrides from the ``styles`` mapping of a config file."""
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    styles = dict(BUILTIN_STYLES)
    for key, override in (raw.get("styles") or {}).items():
        theme = int(key)
        if theme not in styles:
            raise ConfigError(f"style override for unknown theme {theme}")
        styles[theme] = ThemeStyle.from_dict({**override, "theme": theme}, base=styles[theme])
    return styles


def layout_table(
    table: Table,
    style: ThemeStyle,
    metrics: FontMetricsProvider,
    page_mode: Union[PageMode, str] = PageMode.TABLE_BOUNDARY,
    margin: int = A4_MARGIN,
) -> LayoutTree:
    """Compute row, cell and word boxes for ``table``.

    Columns are as wide as their widest cell; section titles span every
    column and widen the first column if they need more room. Cells hold a
    single line of text. In A4 mode the table sits at ``(margin, margin)`` and
    :class:`LayoutOverflowError` is raised if it does not fit.
    """
    page_mode = PageMode(page_mode)
    face, size = style.typeface, style.font_size_px

    # per-cell word widths and content extents
    measured: dict[tuple[int, int], tuple[list[int], int, int]] = {}
    space: dict[bool, int] = {}
    for r, c, cell in table.iter_cells():
        bold = style.is_bold(cell.cell_type)
        if bold not in space:
            space[bold] = metrics.text_width(" ", face, size, bold)
        widths = [metrics.text_width(w, face, size, bold) for w in cell.words]
        text_w = sum(widths) + space[bold] * max(len(widths) - 1, 0)
        measured[(r, c)] = (widths, text_w, metrics.line_height(face, size, bold))

    def outer_width(cell_type: CellType, text_w: int) -> int:
        pt, pr, pb, pl = style.padding[cell_type]
        bt, br, bb, bl = style.borders[cell_type]
        return text_w + pl + pr + bl + br

    def outer_height(cell_type: CellType, line_h: int) -> int:
        pt, pr, pb, pl = style.padding[cell_type]
        bt, br, bb, bl = style.borders[cell_type]
        return line_h + pt + pb + bt + bb

    col_w = [1] * table.column_count
    spanning = []
    for r, c, cell in table.iter_cells():
        _, text_w, _ = measured[(r, c)]
        need = outer_width(cell.cell_type, text_w)
        if cell.colspan == 1:
            col_w[cell.column_index] = max(col_w[cell.column_index], need)
        else:
            spanning.append((cell, need))
    for cell, need in spanning:
        have = sum(col_w[cell.column_index: cell.column_index + cell.colspan])
        if need > have:
            col_w[cell.column_index] += need - have
    col_x = [0]
    for w in col_w:
        col_x.append(col_x[-1] + w)

    row_h = []
    for row in table.rows:
        h = 1
        for c, cell in enumerate(row.cells):
            h = max(h, outer_height(cell.cell_type, measured[(row.row_index, c)][2]))
        row_h.append(h)

    if page_mode is PageMode.A4_PAGE:
        ox = oy = margin
        page = A4_SIZE
    else:
        ox = oy = 0
        page = (col_x[-1], sum(row_h))
    table_box = BBox(ox, oy, ox + col_x[-1], oy + sum(row_h))
    if page_mode is PageMode.A4_PAGE and (
        table_box.x1 > page[0] - margin or table_box.y1 > page[1] - margin
    ):
        raise LayoutOverflowError(
            f"table {table.id} is {table_box.width}x{table_box.height} px, "
            f"page content area is {page[0] - 2 * margin}x{page[1] - 2 * margin} px"
        )

    rows, cells, words = [], [], []
    y = oy
    for row, h in zip(table.rows, row_h):
        rows.append(RowBox(row.row_index, BBox(ox, y, table_box.x1, y + h)))
        for c, cell in enumerate(row.cells):
            x0 = ox + col_x[cell.column_index]
            x1 = ox + col_x[cell.column_index + cell.colspan]
            cb = BBox(x0, y, x1, y + h)
            cells.append(CellBox(row.row_index, c, cb))
            if not cell.words:
                continue
            widths, text_w, line_h = measured[(row.row_index, c)]
            pt, pr, pb, pl = style.padding[cell.cell_type]
            bt, br, bb, bl = style.borders[cell.cell_type]
            if style.align[cell.cell_type] == "right":
                wx = x1 - br - pr - text_w
            else:
                wx = x0 + bl + pl
            wy = y + bt + pt
            gap = space[style.is_bold(cell.cell_type)]
            for k, (text, w) in enumerate(zip(cell.words, widths)):
                words.append(WordBox(text, BBox(wx, wy, wx + w, wy + line_h), row.row_index, c, k))
                wx += w + gap
        y += h

    return LayoutTree(
        table_box=table_box,
        page_size=page,
        rows=tuple(rows),
        cells=tuple(cells),
        words=tuple(words),
    )


def to_virtual_coords(box: BBox, page_width: int, page_height: int) -> tuple[int, int, int, int]:
    """Scale a pixel box into the 0-1000 coordinate space, flooring each coordinate.

    Returns a plain tuple: after quantisation a box may collapse to zero width
    or height, which :class:`BBox` does not allow.
    """
    if page_width <= 0 or page_height <= 0:
        raise ValueError(f"page extent must be positive, got {page_width}x{page_height}")
    if box.x1 > page_width or box.y1 > page_height:
        raise ValueError(f"box {box.as_list()} outside {page_width}x{page_height} page")
    return (
        box.x0 * VIRTUAL_EXTENT // page_width,
        box.y0 * VIRTUAL_EXTENT // page_height,
        box.x1 * VIRTUAL_EXTENT // page_width,
        box.y1 * VIRTUAL_EXTENT // page_height,
    )


def flatten_words(layout: LayoutTree) -> list[tuple[str, BBox]]:
    """All words in reading order: by row, then cell, then position in cell."""
    ordered = sorted(layout.words, key=lambda w: (w.row_index, w.cell_index, w.word_index))
    return [(w.text, w.bbox) for w in ordered]
