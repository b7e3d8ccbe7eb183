"""Rasterise laid-out tables and place them on A4 pages."""

from __future__ import annotations

import functools
import io
import logging
import math
from dataclasses import dataclass
from fractions import Fraction

from PIL import Image, ImageDraw

from .fonts import load_font
from .layout import A4_MARGIN, A4_SIZE, ThemeStyle
from .model import BBox, CellType, LayoutTree, Table

log = logging.getLogger(__name__)

INK_SLACK = 2
OVERLAY_COLORS = {
    "table": (255, 0, 0),
    "row": (0, 0, 255),
    "cell": (0, 200, 0),
    "word": (255, 215, 0),
}


@functools.lru_cache(maxsize=4096)
def _has_glyph(typeface: str, size_px: int, bold: bool, ch: str) -> bool:
    if ch.isspace():
        return True
    # characters the font lacks all render as the same .notdef box
    return _glyph_bitmap(typeface, size_px, bold, ch) != _glyph_bitmap(typeface, size_px, bold, "\U0010fffd")


@functools.lru_cache(maxsize=4096)
def _glyph_bitmap(typeface: str, size_px: int, bold: bool, ch: str) -> bytes:
    im = Image.new("L", (size_px * 2, size_px * 2))
    ImageDraw.Draw(im).text((0, 0), ch, fill=255, font=load_font(typeface, size_px, bold))
    return im.tobytes()


def _striped_rows(table: Table) -> set[int]:
    """Every other data row within each section."""
    striped, seen = set(), {}
    for row in table.rows:
        if row.is_data:
            k = seen.get(row.section_index, 0)
            if k % 2 == 1:
                striped.add(row.row_index)
            seen[row.section_index] = k + 1
    return striped


def render(layout: LayoutTree, table: Table, style: ThemeStyle) -> Image.Image:
    """Draw fills, borders and glyphs for a laid-out table.

    Each word is drawn at the top-left of its word box with the same font the
    layout measured, so ink lands inside the box up to glyph bearings.
    """
    img = Image.new("RGB", layout.page_size, style.page_background)
    draw = ImageDraw.Draw(img)
    cells = {(c.row_index, c.cell_index): c.bbox for c in layout.cells}
    striped = _striped_rows(table) if style.stripe_color is not None else set()

    for r, c, cell in table.iter_cells():
        box = cells[(r, c)]
        fill = style.backgrounds[cell.cell_type]
        if r in striped and cell.cell_type in (CellType.DATA, CellType.ROW_HEADER):
            fill = style.stripe_color
        draw.rectangle([box.x0, box.y0, box.x1 - 1, box.y1 - 1], fill=fill)
        bt, br, bb, bl = style.borders[cell.cell_type]
        for w, rect in (
            (bt, (box.x0, box.y0, box.x1 - 1, box.y0 + bt - 1)),
            (bb, (box.x0, box.y1 - bb, box.x1 - 1, box.y1 - 1)),
            (bl, (box.x0, box.y0, box.x0 + bl - 1, box.y1 - 1)),
            (br, (box.x1 - br, box.y0, box.x1 - 1, box.y1 - 1)),
        ):
            if w > 0:
                draw.rectangle(rect, fill=style.border_color)

    size = style.font_size_px
    for w in layout.words:
        cell = table.rows[w.row_index].cells[w.cell_index]
        bold = style.is_bold(cell.cell_type)
        color = style.text_colors[cell.cell_type]
        if all(_has_glyph(style.typeface, size, bold, ch) for ch in w.text):
            draw.text((w.bbox.x0, w.bbox.y0), w.text, fill=color,
                      font=load_font(style.typeface, size, bold), anchor="la")
        else:
            log.warning("missing glyph in %r for %s; drew notdef box", w.text, style.typeface)
            b = w.bbox
            draw.rectangle([b.x0, b.y0, b.x1 - 1, b.y1 - 1], outline=color)
    return img


def encode_png(img: Image.Image) -> bytes:
    """Lossless PNG with a fixed encoder setup, so equal images give equal bytes."""
    buf = io.BytesIO()
    img.save(buf, format="PNG", compress_level=6, optimize=False)
    return buf.getvalue()


@dataclass(frozen=True)
class Placement:
    """Where :func:`paste_on_a4` put an image: offset plus uniform scale."""

    offset_x: int
    offset_y: int
    scale: Fraction
    width: int
    height: int

    def remap(self, box: BBox) -> BBox:
        s = self.scale
        return BBox(
            self.offset_x + math.floor(box.x0 * s),
            self.offset_y + math.floor(box.y0 * s),
            self.offset_x + math.ceil(box.x1 * s),
            self.offset_y + math.ceil(box.y1 * s),
        )

    @property
    def region(self) -> BBox:
        return BBox(self.offset_x, self.offset_y, self.offset_x + self.width, self.offset_y + self.height)


def a4_placement(width: int, height: int, margin: int = A4_MARGIN) -> Placement:
    avail_w = A4_SIZE[0] - 2 * margin
    avail_h = A4_SIZE[1] - 2 * margin
    scale = min(Fraction(1), Fraction(avail_w, width), Fraction(avail_h, height))
    return Placement(margin, margin, scale, math.ceil(width * scale), math.ceil(height * scale))


def paste_on_a4(table_image: Image.Image, margin: int = A4_MARGIN) -> tuple[Image.Image, Placement]:
    """Put a table image in the top-left of a white A4 canvas, shrinking it to fit."""
    placement = a4_placement(table_image.width, table_image.height, margin)
    canvas = Image.new("RGB", A4_SIZE, (255, 255, 255))
    img = table_image.convert("RGB")
    if placement.scale != 1:
        img = img.resize((placement.width, placement.height), Image.Resampling.LANCZOS)
    canvas.paste(img, (placement.offset_x, placement.offset_y))
    return canvas, placement


def annotation_overlay(img: Image.Image, layout: LayoutTree, side_by_side: bool = True) -> Image.Image:
    """Outline table (red), rows (blue), cells (green) and words (yellow)."""
    over = img.convert("RGB").copy()
    draw = ImageDraw.Draw(over)

    def outline(b: BBox, color):
        draw.rectangle([b.x0, b.y0, b.x1 - 1, b.y1 - 1], outline=color)

    outline(layout.table_box, OVERLAY_COLORS["table"])
    for r in layout.rows:
        outline(r.bbox, OVERLAY_COLORS["row"])
    for c in layout.cells:
        outline(c.bbox, OVERLAY_COLORS["cell"])
    for w in layout.words:
        outline(w.bbox, OVERLAY_COLORS["word"])
    if not side_by_side:
        return over
    out = Image.new("RGB", (img.width * 2, img.height), (255, 255, 255))
    out.paste(img.convert("RGB"), (0, 0))
    out.paste(over, (img.width, 0))
    return out
