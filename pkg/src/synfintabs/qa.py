"""Question-answer pairs over table cells."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .model import CellType, GenerationError, LayoutTree, QAPair, Table, make_question


def generate_qa_pairs(table: Table, layout: LayoutTree) -> list[QAPair]:
    """One pair per non-empty data cell, with its span in the flattened word list.

    Spans are half-open word indices: ``words[start:end]`` is the answer.
    """
    first_word: dict[tuple[int, int], int] = {}
    for i, w in enumerate(layout.words):
        first_word.setdefault((w.row_index, w.cell_index), i)

    pairs = []
    for r, c, cell in table.iter_cells():
        if cell.cell_type is not CellType.DATA or cell.is_empty:
            continue
        row = table.rows[r]
        head = row.cells[0]
        if head.cell_type is not CellType.ROW_HEADER or head.is_empty:
            raise GenerationError(f"table {table.id}: data cell ({r}, {c}) has no row header")
        try:
            column_key = table.column_header_text(cell.column_index)
        except KeyError:
            column_key = ""
        if not column_key:
            raise GenerationError(f"table {table.id}: data cell ({r}, {c}) has no column header")
        start = first_word[(r, c)]
        end = start + len(cell.words)
        answer = " ".join(w.text for w in layout.words[start:end])
        if answer != cell.text:
            raise GenerationError(f"table {table.id}: layout words do not match cell ({r}, {c})")
        pairs.append(QAPair(
            question=make_question(head.text, column_key),
            answer_text=answer,
            row_key=head.text,
            column_key=column_key,
            start=start,
            end=end,
        ))
    return pairs


def select_competition_pair(pairs: Sequence[QAPair], seed: int) -> int:
    if not pairs:
        raise GenerationError("cannot select a competition pair from an empty list")
    return int(np.random.default_rng(seed).integers(len(pairs)))
