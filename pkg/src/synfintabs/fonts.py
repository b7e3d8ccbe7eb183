"""Bundled typefaces and cached font loading."""

from __future__ import annotations

import functools
import math
from importlib import resources

from PIL import ImageFont

FONT_FILES = {
    ("DejaVu Sans", False): "DejaVuSans.ttf",
    ("DejaVu Sans", True): "DejaVuSans-Bold.ttf",
    ("DejaVu Serif", False): "DejaVuSerif.ttf",
    ("DejaVu Serif", True): "DejaVuSerif-Bold.ttf",
    ("DejaVu Sans Mono", False): "DejaVuSansMono.ttf",
    ("DejaVu Sans Mono", True): "DejaVuSansMono-Bold.ttf",
}
TYPEFACES = tuple(sorted({face for face, _ in FONT_FILES}))


def points_to_pixels(points: float, dpi: int = 96) -> int:
    return int(round(points * dpi / 72))


@functools.lru_cache(maxsize=64)
def load_font(typeface: str, size_px: int, bold: bool = False) -> ImageFont.FreeTypeFont:
    try:
        name = FONT_FILES[(typeface, bool(bold))]
    except KeyError:
        raise ValueError(f"unknown typeface {typeface!r}; bundled: {TYPEFACES}") from None
    path = resources.files("synfintabs.data.fonts").joinpath(name)
    with resources.as_file(path) as p:
        return ImageFont.truetype(str(p), size_px, layout_engine=ImageFont.Layout.BASIC)


class PillowFontMetrics:
    """Text measurement backed by the bundled TrueType fonts.

    Widths are advance widths rounded up to whole pixels; line height is
    ascent + descent.
    """

    def text_width(self, text: str, typeface: str, size_px: int, bold: bool = False) -> int:
        if not text:
            return 0
        return max(1, math.ceil(load_font(typeface, size_px, bold).getlength(text)))

    def line_height(self, typeface: str, size_px: int, bold: bool = False) -> int:
        ascent, descent = load_font(typeface, size_px, bold).getmetrics()
        return ascent + descent

    def has_glyphs(self, text: str, typeface: str, size_px: int, bold: bool = False) -> bool:
        font = load_font(typeface, size_px, bold)
        return all(font.getmask(ch).getbbox() is not None or ch.isspace() for ch in text)


class MonospaceMetrics:
    """Fixed-pitch metrics: every character is ``char_width`` wide."""

    def __init__(self, char_width: int = 7, line_px: int = 14):
        self.char_width = char_width
        self.line_px = line_px

    def text_width(self, text: str, typeface: str, size_px: int, bold: bool = False) -> int:
        return self.char_width * len(text)

    def line_height(self, typeface: str, size_px: int, bold: bool = False) -> int:
        return self.line_px
