import dataclasses

import numpy as np
import pytest

from synfintabs.builder import build_dataset
from synfintabs.fonts import PillowFontMetrics
from synfintabs.layout import BUILTIN_STYLES, layout_table
from synfintabs.model import Cell, CellType, Row, Table
from synfintabs.render import render
from synfintabs.sampler import GeneratorConfig, derive_table_seed, sample_spec, sample_table

SMALL_TOTAL = 60


@pytest.fixture(scope="session")
def metrics():
    return PillowFontMetrics()


@pytest.fixture(scope="session")
def config():
    return GeneratorConfig(master_seed=7)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory, config):
    root = tmp_path_factory.mktemp("small") / "ds"
    build_dataset(config, SMALL_TOTAL, root, worker_count=1)
    return root


def sampled_tables(config, n, theme=None):
    """``n`` tables across all themes (or one theme) with their specs."""
    out = []
    for i in range(n):
        t = i % 6 if theme is None else theme
        spec = sample_spec(derive_table_seed(config.master_seed, i), t, config)
        out.append((spec, sample_table(spec, config, table_id=f"t{i}")))
    return out


@pytest.fixture(scope="session")
def laid_out(config, metrics):
    """(table, style, layout) triples for a spread of sampled tables."""
    out = []
    for spec, table in sampled_tables(config, 36):
        style = BUILTIN_STYLES[spec.theme].for_spec(spec)
        out.append((table, style, layout_table(table, style, metrics)))
    return out


def tiny_table(value="52,160", row_key="Idle ver learning satisfied", column_key="30.11.74"):
    header = Row((Cell(CellType.COLUMN_HEADER, (), 0),
                  Cell(CellType.COLUMN_HEADER, tuple(column_key.split()), 1)), 0)
    title = Row((Cell(CellType.SECTION_TITLE, ("Fixed", "assets"), 0, colspan=2),), 1, 0)
    data = Row((Cell(CellType.ROW_HEADER, tuple(row_key.split()), 0),
                Cell(CellType.DATA, tuple(value.split()) if value else (), 1)), 2, 0)
    return Table("tiny", 0, (header, title, data), 2)


def ink_report(layout, table, style, slack=2):
    """Per-word ink statistics from the real render.

    Ink is every pixel that changes when the words are drawn on top of the
    text-free render. Each ink pixel is attributed to the nearest word box
    (Chebyshev distance); a pixel is contained if it lies within ``slack``
    of its word's box. Returns ``[(contained, total, ink_inside_box)]``.
    """
    full = np.asarray(render(layout, table, style), dtype=np.int16)
    blank = np.asarray(render(dataclasses.replace(layout, words=()), table, style), dtype=np.int16)
    ys, xs = np.nonzero(np.any(full != blank, axis=2))
    boxes = np.array([w.bbox.as_list() for w in layout.words])
    if len(boxes) == 0:
        return []
    # distance of each ink pixel to each box; box covers x0..x1-1, y0..y1-1
    dx = np.maximum(np.maximum(boxes[None, :, 0] - xs[:, None], xs[:, None] - (boxes[None, :, 2] - 1)), 0)
    dy = np.maximum(np.maximum(boxes[None, :, 1] - ys[:, None], ys[:, None] - (boxes[None, :, 3] - 1)), 0)
    dist = np.maximum(dx, dy)
    owner = np.argmin(dist, axis=1)
    near = dist[np.arange(len(owner)), owner]
    out = []
    for k in range(len(boxes)):
        mine = owner == k
        out.append((int(np.sum(mine & (near <= slack))), int(np.sum(mine)), int(np.sum(near[mine] == 0))))
    return out


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
