"""Whole-dataset generation: quotas, splits, parallel per-table pipelines, statistics."""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from statistics import mean
from typing import Optional, Union

import numpy as np

from .export import (
    MANIFEST,
    append_manifest,
    read_manifest,
    to_csv,
    to_html,
    to_structure_json,
    write_record_files,
)
from .fonts import PillowFontMetrics
from .layout import A4_MARGIN, A4_SIZE, BUILTIN_STYLES, FontMetricsProvider, ThemeStyle, layout_table
from .model import (
    CellType,
    DatasetRecord,
    GenerationError,
    LayoutOverflowError,
    LayoutTree,
    QAPair,
    Split,
    Table,
    TableSpec,
)
from .qa import generate_qa_pairs, select_competition_pair
from .render import encode_png, paste_on_a4, render
from .sampler import (
    GeneratorConfig,
    derive_table_seed,
    largest_remainder,
    parse_number,
    sample_spec,
    sample_table,
    theme_sequence,
)

log = logging.getLogger(__name__)

SPLIT_WEIGHTS = (0.8, 0.1, 0.1)
SPLIT_ORDER = (Split.TRAIN, Split.VALIDATION, Split.TEST)
# retry seeds use table indices from here upwards, never colliding with first attempts
RETRY_INDEX_BASE = 1 << 40
RETRY_STRIDE = 1 << 10
MIN_FONT_PT = 7


def split_counts(theme_total: int) -> dict[Split, int]:
    return dict(zip(SPLIT_ORDER, largest_remainder(theme_total, SPLIT_WEIGHTS)))


def assign_split(index_within_theme: int, theme_total: int) -> Split:
    """Split for a position in the (already shuffled) order of one theme's tables.

    The first 80% quota is train, the next 10% validation, the rest test;
    quotas use largest remainders with validation winning ties over test.
    """
    if not 0 <= index_within_theme < theme_total:
        raise ValueError(f"index {index_within_theme} out of range for theme total {theme_total}")
    bound = 0
    for split, n in split_counts(theme_total).items():
        bound += n
        if index_within_theme < bound:
            return split
    raise AssertionError("unreachable")


@dataclasses.dataclass(frozen=True)
class TablePlan:
    index: int
    theme: int
    split: Split

    @property
    def table_id(self) -> str:
        return f"{self.index:06d}"


def plan_dataset(config: GeneratorConfig, total: int) -> list[TablePlan]:
    if total < 1:
        raise ValueError(f"total must be >= 1, got {total}")
    themes = theme_sequence(total, tuple(config.theme_weights))
    members: dict[int, list[int]] = {}
    for i, t in enumerate(themes):
        members.setdefault(t, []).append(i)
    split_of: dict[int, Split] = {}
    for t, idx in members.items():
        order = np.random.default_rng([config.master_seed & ((1 << 64) - 1), 2, t]).permutation(len(idx))
        for k, i in enumerate(idx):
            split_of[i] = assign_split(int(order[k]), len(idx))
    return [TablePlan(i, themes[i], split_of[i]) for i in range(total)]


def attempt_seed(master_seed: int, index: int, attempt: int) -> int:
    if attempt == 0:
        return derive_table_seed(master_seed, index)
    return derive_table_seed(master_seed, RETRY_INDEX_BASE + index * RETRY_STRIDE + attempt)


def _fit_layout(table, spec: TableSpec, style: ThemeStyle, metrics):
    """Lay out at the sampled font size, shrinking the font until the table fits on A4."""
    size = spec.font_size
    content = (A4_SIZE[0] - 2 * A4_MARGIN, A4_SIZE[1] - 2 * A4_MARGIN)
    while True:
        s = dataclasses.replace(style, font_size_pt=size)
        layout = layout_table(table, s, metrics)
        if layout.table_box.width <= content[0] and layout.table_box.height <= content[1]:
            return layout, s
        if size <= MIN_FONT_PT:
            raise LayoutOverflowError(
                f"table {table.id} is {layout.table_box.width}x{layout.table_box.height} px "
                f"even at {size}pt"
            )
        size -= 1


@dataclasses.dataclass(frozen=True)
class BuiltTable:
    """A laid-out table that passed every rejection check, before rendering."""

    table: Table
    layout: LayoutTree
    style: ThemeStyle
    qa_pairs: tuple[QAPair, ...]
    seed: int


def build_table(plan: TablePlan, config: GeneratorConfig,
                styles: Optional[dict[int, ThemeStyle]] = None,
                metrics: Optional[FontMetricsProvider] = None) -> BuiltTable:
    """Sample, lay out and annotate one table, regenerating on rejection."""
    styles = styles or BUILTIN_STYLES
    metrics = metrics or PillowFontMetrics()
    failures = []
    for attempt in range(config.max_retries + 1):
        seed = attempt_seed(config.master_seed, plan.index, attempt)
        spec = sample_spec(seed, plan.theme, config)
        table = sample_table(spec, config, table_id=plan.table_id)
        try:
            layout, style = _fit_layout(table, spec, styles[plan.theme].for_spec(spec), metrics)
        except LayoutOverflowError as exc:
            failures.append(str(exc))
        else:
            pairs = generate_qa_pairs(table, layout)
            if pairs:
                return BuiltTable(table, layout, style, tuple(pairs), seed)
            failures.append(f"seed {seed}: no non-empty data cells")
        log.debug("table %d attempt %d rejected: %s", plan.index, attempt, failures[-1])
    raise GenerationError(
        f"table {plan.index} failed after {config.max_retries + 1} attempts "
        f"(last seed {seed}): {failures[-1]}"
    )


def generate_record(plan: TablePlan, config: GeneratorConfig,
                    styles: Optional[dict[int, ThemeStyle]] = None) -> DatasetRecord:
    """Run the full pipeline for one table: build, render, export."""
    built = build_table(plan, config, styles)
    image = render(built.layout, built.table, built.style)
    a4, placement = paste_on_a4(image)
    return DatasetRecord(
        id=plan.table_id,
        theme=plan.theme,
        split=plan.split,
        table=built.table,
        layout=built.layout,
        image_png=encode_png(image),
        image_a4_png=encode_png(a4),
        a4_offset=(placement.offset_x, placement.offset_y),
        a4_scale=float(placement.scale),
        html=to_html(built.table, built.style),
        structure_json=to_structure_json(built.table, built.layout, virtual=True),
        csv=to_csv(built.table),
        qa_pairs=built.qa_pairs,
        competition_pair=select_competition_pair(built.qa_pairs, built.seed),
        seed=built.seed,
    )


def _build_one(args) -> tuple[dict, int]:
    plan, config, styles, root, with_a4 = args
    record = generate_record(plan, config, styles)
    entry = write_record_files(record, root, with_a4)
    retried = int(record.seed != derive_table_seed(config.master_seed, plan.index))
    return entry, retried


def build_dataset(
    config: GeneratorConfig,
    total: int,
    output_root: Union[str, Path],
    worker_count: int = 1,
    styles: Optional[dict[int, ThemeStyle]] = None,
    with_a4: bool = True,
    progress: bool = False,
) -> dict:
    """Generate ``total`` records under ``output_root`` and return a summary.

    Output depends only on ``config`` and ``total``; the worker count changes
    speed, not bytes. The output root must not already hold a manifest.
    """
    root = Path(output_root)
    if (root / MANIFEST).exists():
        raise FileExistsError(f"{root / MANIFEST} already exists; use a fresh output directory")
    root.mkdir(parents=True, exist_ok=True)
    plans = plan_dataset(config, total)
    jobs = [(p, config, styles, root, with_a4) for p in plans]

    entries: list[dict] = []
    retried = 0
    if worker_count <= 1:
        results = map(_build_one, jobs)
        pool = None
    else:
        pool = ProcessPoolExecutor(max_workers=worker_count)
        results = pool.map(_build_one, jobs, chunksize=max(1, total // (worker_count * 8)))
    try:
        for k, (entry, r) in enumerate(results, 1):
            entries.append(entry)
            retried += r
            if progress and (k % 100 == 0 or k == total):
                print(f"generated {k}/{total}", file=sys.stderr, flush=True)
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)

    append_manifest(root, entries)
    summary = summarize_entries(entries)
    summary["retried_tables"] = retried
    (root / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                       encoding="utf-8")
    return summary


def summarize_entries(entries: list[dict]) -> dict:
    themes = Counter(str(e["theme"]) for e in entries)
    splits = Counter(e["split"] for e in entries)
    by = Counter(f"{e['theme']}/{e['split']}" for e in entries)
    return {
        "total": len(entries),
        "themes": {str(t): themes.get(str(t), 0) for t in range(6)},
        "splits": {s.value: splits.get(s.value, 0) for s in SPLIT_ORDER},
        "theme_splits": {k: by[k] for k in sorted(by)},
    }


def _distribution(values: list[int]) -> dict:
    if not values:
        return {"min": 0, "max": 0, "mean": 0.0, "histogram": {}}
    hist = Counter(values)
    return {
        "min": min(values),
        "max": max(values),
        "mean": round(mean(values), 4),
        "histogram": {str(k): hist[k] for k in sorted(hist)},
    }


def stats(output_root: Union[str, Path]) -> dict:
    """Counts and distributions over a generated dataset, recomputed from its files."""
    root = Path(output_root)
    entries = read_manifest(root) if (root / MANIFEST).exists() else []
    rows, cols, qa = [], [], []
    data_cells = empty_cells = value_cells = negative = 0
    missing: dict[str, list[str]] = {}
    for e in entries:
        gone = [rel for rel in e["paths"].values() if not (root / rel).exists()]
        if gone:
            missing[e["id"]] = gone
            continue
        ann = json.loads((root / e["paths"]["annotation"]).read_text(encoding="utf-8"))
        s = ann["structure"]
        rows.append(len(s["rows"]))
        cols.append(s["column_count"])
        qa.append(len(ann["qa_pairs"]))
        for r in s["rows"]:
            for c in r["cells"]:
                if c["type"] != CellType.DATA.value:
                    continue
                data_cells += 1
                if not c["words"]:
                    empty_cells += 1
                    continue
                try:
                    v = parse_number(c["text"])
                except ValueError:
                    continue
                value_cells += 1
                negative += v < 0
    report = summarize_entries(entries)
    report.update({
        "rows_per_table": _distribution(rows),
        "columns_per_table": _distribution(cols),
        "qa_pairs_per_table": _distribution(qa),
        "qa_pairs_total": sum(qa),
        "data_cells": data_cells,
        "empty_cell_rate": round(empty_cells / data_cells, 6) if data_cells else 0.0,
        "negative_value_rate": round(negative / value_cells, 6) if value_cells else 0.0,
        "missing_files": missing,
    })
    return report


def default_worker_count() -> int:
    return int(os.environ.get("SYNFINTABS_WORKERS", "1"))
