"""Seeded sampling of table blueprints and their content."""

from __future__ import annotations

import dataclasses
import datetime as dt
import functools
import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import yaml

from .model import Cell, CellType, ConfigError, Row, Table, TableSpec, keys_unambiguous

MASK64 = (1 << 64) - 1
THEME_COUNT = 6
DEFAULT_THEME_WEIGHTS = (0.40, 0.12, 0.12, 0.12, 0.12, 0.12)

MONTHS = (
    "January", "February", "March", "April", "May", "June",
    "July", "August", "September", "October", "November", "December",
)
DATE_FORMATS = ("DD.MM.YY", "DD/MM/YYYY", "DD Month YYYY", "DD Mon YYYY", "YYYY")

# two-digit years are read back into this window
_PIVOT_START = 1950


@dataclass(frozen=True)
class ThemePool:
    """Per-theme choices that :func:`sample_spec` draws from."""

    typefaces: tuple[str, ...]
    font_sizes: tuple[int, ...]
    date_formats: tuple[str, ...]
    currency_symbols: tuple[str, ...]
    currency_row_probability: float
    bold_header_probability: float
    numbering_probability: float


THEME_POOLS: dict[int, ThemePool] = {
    0: ThemePool(("DejaVu Sans", "DejaVu Serif"), (9, 10, 11), ("DD.MM.YY", "DD/MM/YYYY", "DD Month YYYY", "YYYY"),
                 ("£",), 0.9, 0.5, 0.3),
    1: ThemePool(("DejaVu Sans", "DejaVu Sans Mono"), (9, 10, 11), ("DD/MM/YYYY", "DD Mon YYYY", "YYYY"),
                 ("£", "$", "€"), 0.5, 0.5, 0.2),
    2: ThemePool(("DejaVu Sans", "DejaVu Sans Mono"), (9, 10, 11), ("DD.MM.YY", "DD/MM/YYYY", "YYYY"),
                 ("£", "$", "€"), 0.5, 0.6, 0.2),
    3: ThemePool(("DejaVu Sans", "DejaVu Serif"), (9, 10, 11), ("DD Mon YYYY", "DD.MM.YY", "YYYY"),
                 ("£", "$", "€"), 0.5, 0.4, 0.2),
    4: ThemePool(("DejaVu Sans Mono", "DejaVu Sans"), (9, 10), ("DD/MM/YYYY", "YYYY"),
                 ("£", "$", "€"), 0.5, 0.5, 0.2),
    5: ThemePool(("DejaVu Serif", "DejaVu Sans"), (9, 10, 11, 12), ("DD Month YYYY", "YYYY"),
                 ("£", "£m", "£'000"), 0.7, 0.7, 0.4),
}


def _read_lines(text: str) -> tuple[str, ...]:
    return tuple(line.strip() for line in text.splitlines() if line.strip())


def load_word_list(path: Union[str, Path]) -> tuple[str, ...]:
    return _read_lines(Path(path).read_text(encoding="utf-8"))


@functools.lru_cache(maxsize=None)
def default_vocabulary() -> tuple[str, ...]:
    return _read_lines(resources.files("synfintabs.data").joinpath("vocabulary.txt").read_text("utf-8"))


@functools.lru_cache(maxsize=None)
def default_section_titles() -> tuple[str, ...]:
    return _read_lines(
        resources.files("synfintabs.data").joinpath("section_titles.txt").read_text("utf-8")
    )


@dataclass(frozen=True)
class GeneratorConfig:
    master_seed: int = 0
    theme_weights: tuple[float, ...] = DEFAULT_THEME_WEIGHTS
    vocabulary: tuple[str, ...] = field(default_factory=default_vocabulary, repr=False)
    section_titles: tuple[str, ...] = field(default_factory=default_section_titles, repr=False)
    number_min: int = 1
    number_max: int = 9_999_999
    negative_probability: float = 0.15
    empty_cell_probability: float = 0.05
    sections: tuple[int, int] = (1, 3)
    rows_per_section: tuple[int, int] = (2, 8)
    value_columns: tuple[int, int] = (1, 3)
    row_header_words: tuple[int, int] = (1, 6)
    note_column_probability: float = 0.3
    note_fill_probability: float = 0.4
    max_retries: int = 20

    def __post_init__(self):
        for name in ("theme_weights", "vocabulary", "section_titles", "sections",
                     "rows_per_section", "value_columns", "row_header_words"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        check_weights(self.theme_weights)
        if not self.vocabulary:
            raise ConfigError("vocabulary must not be empty")
        if not self.section_titles:
            raise ConfigError("section_titles must not be empty")
        bad = [w for w in self.vocabulary if not w or any(c.isspace() for c in w)]
        if bad:
            raise ConfigError(f"vocabulary entries must be single words, got {bad[:3]}")
        if not 0 <= self.number_min <= self.number_max:
            raise ConfigError("need 0 <= number_min <= number_max")
        for name in ("sections", "rows_per_section", "value_columns", "row_header_words"):
            lo, hi = getattr(self, name)
            if not 1 <= lo <= hi:
                raise ConfigError(f"{name} must be a range 1 <= lo <= hi, got {(lo, hi)}")
        for name in ("negative_probability", "empty_cell_probability",
                     "note_column_probability", "note_fill_probability"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {p}")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")

    def with_themes(self, themes: Sequence[int]) -> "GeneratorConfig":
        """Restrict generation to ``themes``, renormalising their weights."""
        keep = set(themes)
        if not keep or not keep <= set(range(THEME_COUNT)):
            raise ConfigError(f"themes must be a non-empty subset of 0..5, got {sorted(keep)}")
        raw = [Fraction(w).limit_denominator(10**9) if t in keep else Fraction(0)
               for t, w in enumerate(self.theme_weights)]
        total = sum(raw)
        if total == 0:
            raise ConfigError("selected themes all have zero weight")
        return dataclasses.replace(self, theme_weights=tuple(float(w / total) for w in raw))


def load_config(path: Union[str, Path], **overrides) -> GeneratorConfig:
    """Read a YAML (or JSON) config file.

    Keys are :class:`GeneratorConfig` field names, plus ``vocabulary_file`` and
    ``section_titles_file`` pointing at newline-delimited word lists (relative
    paths resolve against the config file). A ``styles`` key is ignored here;
    :func:`synfintabs.layout.load_styles` reads it.
    """
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping")
    raw.pop("styles", None)
    for key, target in (("vocabulary_file", "vocabulary"), ("section_titles_file", "section_titles")):
        if key in raw:
            p = Path(raw.pop(key))
            if not p.is_absolute():
                p = path.parent / p
            try:
                raw[target] = load_word_list(p)
            except OSError as exc:
                raise ConfigError(f"cannot read {key} {p}: {exc}") from exc
    names = {f.name for f in dataclasses.fields(GeneratorConfig)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    raw.update(overrides)
    return GeneratorConfig(**raw)


def check_weights(weights: Sequence[float]) -> None:
    if len(weights) != THEME_COUNT:
        raise ConfigError(f"need {THEME_COUNT} theme weights, got {len(weights)}")
    if any(w < 0 for w in weights):
        raise ConfigError("theme weights must be non-negative")
    if abs(sum(weights) - 1.0) > 1e-9:
        raise ConfigError(f"theme weights must sum to 1, got {sum(weights)}")


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_table_seed(master_seed: int, table_index: int) -> int:
    """64-bit seed for one table; a bijection in ``table_index`` for a fixed master seed."""
    if table_index < 0:
        raise ValueError(f"table_index must be >= 0, got {table_index}")
    return _splitmix64((_splitmix64(master_seed & MASK64) + table_index) & MASK64)


def largest_remainder(total: int, weights: Sequence[float]) -> list[int]:
    """Integer quotas proportional to ``weights`` summing to ``total``.

    Leftover units go to the largest fractional remainders; ties go to the
    lower index.
    """
    fr = [Fraction(w).limit_denominator(10**9) for w in weights]
    s = sum(fr)
    exact = [f / s * total for f in fr]
    counts = [int(e) for e in exact]  # floor, exact is non-negative
    left = total - sum(counts)
    order = sorted(range(len(exact)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[:left]:
        counts[i] += 1
    return counts


@functools.lru_cache(maxsize=8)
def theme_sequence(total: int, weights: tuple[float, ...]) -> tuple[int, ...]:
    """Theme of every table index, interleaved so that every prefix is close to quota."""
    counts = largest_remainder(total, weights)
    assigned = [0] * len(counts)
    seq = []
    for i in range(total):
        best, best_key = -1, None
        for t, c in enumerate(counts):
            if assigned[t] >= c:
                continue
            # deficit relative to the ideal share of the first i+1 slots
            key = c * (i + 1) - assigned[t] * total
            if best_key is None or key > best_key:
                best, best_key = t, key
        assigned[best] += 1
        seq.append(best)
    return tuple(seq)


def assign_theme(table_index: int, total: int, weights: Sequence[float] = DEFAULT_THEME_WEIGHTS) -> int:
    check_weights(weights)
    if not 0 <= table_index < total:
        raise ValueError(f"table_index {table_index} out of range for total {total}")
    return theme_sequence(total, tuple(weights))[table_index]


def format_number(value: int, negative_style: str = "parentheses", thousands_separator: bool = True) -> str:
    """Render an integer the way financial statements print it.

    >>> format_number(-1839)
    '(1,839)'
    >>> format_number(-1839, "minus", False)
    '-1839'
    """
    if negative_style not in ("parentheses", "minus"):
        raise ConfigError(f"unknown negative style {negative_style!r}")
    digits = f"{abs(value):,}" if thousands_separator else str(abs(value))
    if value >= 0:
        return digits
    return f"({digits})" if negative_style == "parentheses" else f"-{digits}"


def parse_number(text: str) -> int:
    """Inverse of :func:`format_number` for either negative style."""
    t = text.strip()
    neg = False
    if t.startswith("(") and t.endswith(")"):
        neg, t = True, t[1:-1]
    elif t.startswith("-"):
        neg, t = True, t[1:]
    value = int(t.replace(",", ""))
    return -value if neg else value


def format_date(date: dt.date, pattern: str) -> str:
    if pattern == "DD.MM.YY":
        return f"{date.day:02d}.{date.month:02d}.{date.year % 100:02d}"
    if pattern == "DD/MM/YYYY":
        return f"{date.day:02d}/{date.month:02d}/{date.year:04d}"
    if pattern == "DD Month YYYY":
        return f"{date.day} {MONTHS[date.month - 1]} {date.year:04d}"
    if pattern == "DD Mon YYYY":
        return f"{date.day} {MONTHS[date.month - 1][:3]} {date.year:04d}"
    if pattern == "YYYY":
        return f"{date.year:04d}"
    raise ConfigError(f"unsupported date pattern {pattern!r}; expected one of {DATE_FORMATS}")


def parse_date(text: str, pattern: str) -> dt.date:
    """Read back a date written by :func:`format_date`.

    Fields the pattern does not carry come back as 1 (``"YYYY"`` gives 1 January).
    Two-digit years resolve into 1950-2049.
    """
    if pattern == "DD.MM.YY":
        d, m, y = (int(p) for p in text.split("."))
        year = _PIVOT_START + (y - _PIVOT_START) % 100
        return dt.date(year, m, d)
    if pattern == "DD/MM/YYYY":
        d, m, y = (int(p) for p in text.split("/"))
        return dt.date(y, m, d)
    if pattern in ("DD Month YYYY", "DD Mon YYYY"):
        d, name, y = text.split(" ")
        names = MONTHS if pattern == "DD Month YYYY" else tuple(n[:3] for n in MONTHS)
        return dt.date(int(y), names.index(name) + 1, int(d))
    if pattern == "YYYY":
        if not re.fullmatch(r"\d{4}", text):
            raise ValueError(f"not a 4-digit year: {text!r}")
        return dt.date(int(text), 1, 1)
    raise ConfigError(f"unsupported date pattern {pattern!r}; expected one of {DATE_FORMATS}")


def _spec_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng([seed & MASK64, 0])


def _content_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng([seed & MASK64, 1])


def _randint(rng: np.random.Generator, lo: int, hi: int) -> int:
    return int(rng.integers(lo, hi + 1))


def _choice(rng: np.random.Generator, items: Sequence):
    return items[int(rng.integers(len(items)))]


def sample_spec(seed: int, theme: int, config: Optional[GeneratorConfig] = None) -> TableSpec:
    config = config or GeneratorConfig()
    if theme not in THEME_POOLS:
        raise ConfigError(f"unknown theme {theme}")
    pool = THEME_POOLS[theme]
    rng = _spec_rng(seed)
    sections = _randint(rng, *config.sections)
    rows = tuple(_randint(rng, *config.rows_per_section) for _ in range(sections))
    return TableSpec(
        theme=theme,
        typeface=_choice(rng, pool.typefaces),
        font_size=_choice(rng, pool.font_sizes),
        bold_headers=bool(rng.random() < pool.bold_header_probability),
        section_count=sections,
        rows_per_section=rows,
        value_column_count=_randint(rng, *config.value_columns),
        has_note_column=bool(rng.random() < config.note_column_probability),
        date_format=_choice(rng, pool.date_formats),
        section_numbering=bool(rng.random() < pool.numbering_probability),
        currency_row=bool(rng.random() < pool.currency_row_probability),
        currency_symbol=_choice(rng, pool.currency_symbols),
        per_table_seed=seed & MASK64,
    )


def _sample_magnitude(rng: np.random.Generator, lo: int, hi: int) -> int:
    # uniform digit count, then uniform within that decade
    lo = max(lo, 0)
    d = _randint(rng, len(str(lo)), len(str(hi)))
    a = max(lo, 10 ** (d - 1) if d > 1 else 0)
    b = min(hi, 10**d - 1)
    return _randint(rng, a, b)


def section_title_text(cell: Cell) -> str:
    """Title text with any section-number prefix (``"2."``) removed."""
    words = list(cell.words)
    if words and re.fullmatch(r"\d+\.", words[0]):
        words = words[1:]
    return " ".join(words)


def _row_header(rng: np.random.Generator, config: GeneratorConfig, column_keys: Sequence[str]) -> list[str]:
    # redraw the rare headers that would make a key ambiguous inside a question
    vocab = config.vocabulary
    while True:
        n = _randint(rng, *config.row_header_words)
        words = [vocab[int(i)] for i in rng.integers(len(vocab), size=n)]
        words[0] = words[0][:1].upper() + words[0][1:]
        key = " ".join(words)
        if all(keys_unambiguous(key, ck) for ck in column_keys):
            return words


def sample_table(spec: TableSpec, config: Optional[GeneratorConfig] = None,
                 table_id: Optional[str] = None) -> Table:
    config = config or GeneratorConfig()
    rng = _content_rng(spec.per_table_seed)
    ncols = spec.column_count
    value_start = 1 + int(spec.has_note_column)

    # column header dates: shared day/month, consecutive years, newest first
    year = _randint(rng, 1970, 2030)
    month = _randint(rng, 1, 12)
    day = _randint(rng, 1, 28) if month != 12 else _choice(rng, (31, 30, 28))
    if spec.date_format == "YYYY":
        day, month = 1, 1
    dates = [dt.date(year - k, month, day) for k in range(spec.value_column_count)]

    rows: list[Row] = []

    def add_row(cells: list[Cell], section: Optional[int] = None) -> None:
        rows.append(Row(tuple(cells), len(rows), section))

    header = [Cell(CellType.COLUMN_HEADER, (), 0)]
    if spec.has_note_column:
        header.append(Cell(CellType.COLUMN_HEADER, ("Note",), 1))
    for k, d in enumerate(dates):
        header.append(Cell(CellType.COLUMN_HEADER, tuple(format_date(d, spec.date_format).split()),
                           value_start + k))
    add_row(header)

    if spec.currency_row:
        cur = [Cell(CellType.CURRENCY_UNIT, (), c) for c in range(value_start)]
        cur += [Cell(CellType.CURRENCY_UNIT, (spec.currency_symbol,), value_start + k)
                for k in range(spec.value_column_count)]
        add_row(cur)

    column_keys = [c.text for c in header[1:]]
    for s, nrows in enumerate(spec.rows_per_section):
        title = _choice(rng, config.section_titles).split()
        if spec.section_numbering:
            title = [f"{s + 1}."] + title
        add_row([Cell(CellType.SECTION_TITLE, tuple(title), 0, colspan=ncols)], s)
        for _ in range(nrows):
            words = _row_header(rng, config, column_keys)
            cells = [Cell(CellType.ROW_HEADER, tuple(words), 0)]
            if spec.has_note_column:
                note = ()
                if rng.random() < config.note_fill_probability:
                    note = (str(_randint(rng, 1, 30)),)
                cells.append(Cell(CellType.DATA, note, 1))
            for k in range(spec.value_column_count):
                if rng.random() < config.empty_cell_probability:
                    cells.append(Cell(CellType.DATA, (), value_start + k))
                    continue
                value = _sample_magnitude(rng, config.number_min, config.number_max)
                if value and rng.random() < config.negative_probability:
                    value = -value
                cells.append(Cell(CellType.DATA, (format_number(value),), value_start + k))
            add_row(cells, s)

    return Table(
        id=table_id if table_id is not None else f"{spec.per_table_seed:016x}",
        theme=spec.theme,
        rows=tuple(rows),
        column_count=ncols,
        currency_symbol=spec.currency_symbol,
    )
