"""Span-extraction evaluation: contexts, answer search, exact match, decoding, OCR noise."""

from __future__ import annotations

import csv
import dataclasses
import enum
import json
import logging
import zlib
from difflib import SequenceMatcher
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .export import read_annotation, read_manifest
from .layout import A4_SIZE, to_virtual_coords
from .model import BBox, QAPair
from .render import a4_placement

log = logging.getLogger(__name__)

VBox = tuple[int, int, int, int]
SUBSTITUTION_ALPHABET = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789.,()-£$"


class ContextSource(str, enum.Enum):
    GROUND_TRUTH = "GroundTruth"
    OCR_OUTPUT = "OcrOutput"


class ErrorCategory(str, enum.Enum):
    HEADER_NOT_IN_CONTEXT = "HeaderNotInContext"
    ANSWER_NOT_IN_CONTEXT = "AnswerNotInContext"
    WRONG_SPAN = "WrongSpan"
    CORRECT = "Correct"


@dataclasses.dataclass(frozen=True)
class Context:
    """Words in reading order with their boxes in virtual coordinates."""

    words: tuple[str, ...]
    boxes: tuple[VBox, ...]
    source: ContextSource = ContextSource.GROUND_TRUTH

    def __post_init__(self):
        if len(self.words) != len(self.boxes):
            raise ValueError(f"{len(self.words)} words but {len(self.boxes)} boxes")

    def __len__(self) -> int:
        return len(self.words)


@dataclasses.dataclass(frozen=True)
class SpanPrediction:
    """Half-open word span ``[start, end)``; unconstrained decoding may leave it inverted."""

    start: int
    end: int
    start_scores: Optional[tuple[float, ...]] = None
    end_scores: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.start < 0 or self.end < 0:
            raise ValueError(f"invalid span ({self.start}, {self.end})")


@dataclasses.dataclass(frozen=True)
class Example:
    id: str
    pair: QAPair
    structure: dict


def context_from_structure(structure: dict, page: str = "table") -> Context:
    """Ground-truth context from structure JSON.

    ``page="table"`` normalises boxes by the cropped table image,
    ``page="a4"`` by the A4 page the table is pasted onto.
    """
    entries = sorted((w["index"], w["text"], w["bbox"])
                     for r in structure["rows"] for c in r["cells"] for w in c["words"])
    if page == "table":
        extent, place = tuple(structure["page_size"]), None
    elif page == "a4":
        extent, place = A4_SIZE, a4_placement(*structure["page_size"])
    else:
        raise ValueError(f"page must be 'table' or 'a4', got {page!r}")
    words, boxes = [], []
    for _, text, b in entries:
        box = BBox.from_list(b)
        if place is not None:
            box = place.remap(box)
        words.append(text)
        boxes.append(to_virtual_coords(box, *extent))
    return Context(tuple(words), tuple(boxes), ContextSource.GROUND_TRUTH)


def find_answer_span(context: Context, answer_text: str) -> Optional[tuple[int, int]]:
    """First contiguous window whose space-joined words equal ``answer_text``; None if absent."""
    for i in range(len(context.words)):
        joined = ""
        for j in range(i, len(context.words)):
            joined = context.words[j] if j == i else joined + " " + context.words[j]
            if joined == answer_text:
                return i, j + 1
            if len(joined) >= len(answer_text):
                break
    return None


def contains_text(context: Context, text: str) -> bool:
    return find_answer_span(context, text) is not None


def _argmax(v: np.ndarray) -> int:
    # np.argmax already returns the first maximum
    return int(np.argmax(v))


def decode_span(start_scores: Sequence[float], end_scores: Sequence[float],
                constrained: bool = True) -> SpanPrediction:
    """Pick a span from per-position scores.

    ``start`` is the best start position. Unconstrained, the end is the best
    end position on its own; constrained, it is the best position at or after
    the start, so the returned half-open span is never empty. Ties go to the
    lowest index.
    """
    s = np.asarray(start_scores, dtype=float)
    e = np.asarray(end_scores, dtype=float)
    if s.ndim != 1 or s.shape != e.shape:
        raise ValueError(f"score vectors must be 1-d and equal length, got {s.shape} and {e.shape}")
    if len(s) == 0:
        raise ValueError("empty score vectors")
    if constrained and len(s) < 2:
        raise ValueError(f"constrained decoding needs at least 2 positions, got {len(s)}")
    if np.isnan(s).any() or np.isnan(e).any():
        raise ValueError("scores contain NaN")
    start = _argmax(s)
    end_raw = start + _argmax(e[start:]) if constrained else _argmax(e)
    return SpanPrediction(start, end_raw + 1, tuple(s.tolist()), tuple(e.tolist()))


def exact_match(pred: SpanPrediction, gold_start: int, gold_end: int) -> bool:
    return pred.start == gold_start and pred.end == gold_end


def classify_error(context: Context, gold: QAPair, pred: Optional[SpanPrediction],
                   gold_span: Optional[tuple[int, int]] = None) -> ErrorCategory:
    """Assign one category to an evaluated example.

    ``gold_span`` defaults to the pair's annotated span. A zero-assigned gold
    span or a missing prediction is never correct. A missing header wins over
    a missing answer; anything else that is wrong is a wrong span.
    """
    gs, ge = gold_span if gold_span is not None else (gold.start, gold.end)
    if pred is not None and exact_match(pred, gs, ge) and (gs, ge) != (0, 0):
        return ErrorCategory.CORRECT
    if not contains_text(context, gold.row_key) or not contains_text(context, gold.column_key):
        return ErrorCategory.HEADER_NOT_IN_CONTEXT
    if find_answer_span(context, gold.answer_text) is None:
        return ErrorCategory.ANSWER_NOT_IN_CONTEXT
    return ErrorCategory.WRONG_SPAN


def _example_seed(seed: int, example_id: str) -> int:
    return ((seed & 0xFFFFFFFF) << 32) | zlib.crc32(example_id.encode("utf-8"))


def corrupt_context(context: Context, corruption_rate: float, seed: int,
                    log_ops: Optional[list] = None) -> Context:
    """Simulate OCR noise: each word is substituted, dropped or split with probability ``rate``.

    Every random draw is made per word whatever the rate, so the words
    corrupted at a lower rate are a subset of those corrupted at a higher
    rate, with identical edits.
    """
    if not 0.0 <= corruption_rate <= 1.0:
        raise ValueError(f"corruption rate must be in [0, 1], got {corruption_rate}")
    n = len(context.words)
    rng = np.random.default_rng(seed & ((1 << 64) - 1))
    hit = rng.random(n)
    ops = rng.integers(0, 3, n)
    pos = rng.random(n)
    chars = rng.integers(0, len(SUBSTITUTION_ALPHABET) - 1, n)
    words: list[str] = []
    boxes: list[VBox] = []
    for i, (w, b) in enumerate(zip(context.words, context.boxes)):
        if hit[i] >= corruption_rate:
            words.append(w)
            boxes.append(b)
            continue
        op = int(ops[i])
        if op == 2 and len(w) < 2:
            op = 0
        if op == 0:
            k = int(pos[i] * len(w))
            pool = SUBSTITUTION_ALPHABET.replace(w[k], "") if w[k] in SUBSTITUTION_ALPHABET \
                else SUBSTITUTION_ALPHABET[:-1]
            new = w[:k] + pool[int(chars[i])] + w[k + 1:]
            words.append(new)
            boxes.append(b)
            detail = new
        elif op == 1:
            detail = None
        else:
            k = 1 + int(pos[i] * (len(w) - 1))
            x0, y0, x1, y1 = b
            xm = x0 + (x1 - x0) * k // len(w)
            words += [w[:k], w[k:]]
            boxes += [(x0, y0, xm, y1), (xm, y0, x1, y1)]
            detail = [w[:k], w[k:]]
        if log_ops is not None:
            log_ops.append({"index": i, "word": w, "op": ("substitute", "drop", "split")[op], "result": detail})
    return Context(tuple(words), tuple(boxes), ContextSource.OCR_OUTPUT)


Predictor = Callable[[Example, Context], SpanPrediction]


def oracle_predictor(example: Example, context: Context) -> SpanPrediction:
    """Returns the gold span for the context it is given."""
    gs, ge = gold_span_for(example, context)
    return SpanPrediction(gs, ge)


def search_predictor(example: Example, context: Context) -> SpanPrediction:
    """Answer-aware search: first exact occurrence, else the closest-looking window.

    The fallback mimics a model pointing at a mangled answer; it can never
    be scored correct because the gold span of such an example is zero-assigned.
    """
    span = find_answer_span(context, example.pair.answer_text)
    if span is not None:
        return SpanPrediction(*span)
    target = example.pair.answer_text
    n = len(target.split(" "))
    best, best_score = (0, 0), -1.0
    for size in range(1, n + 2):
        for i in range(0, len(context.words) - size + 1):
            score = SequenceMatcher(None, " ".join(context.words[i:i + size]), target).ratio()
            if score > best_score:
                best, best_score = (i, i + size), score
    return SpanPrediction(*best)


def file_predictor(predictions: dict[str, dict], constrained: bool = True) -> Predictor:
    def predict(example: Example, context: Context) -> SpanPrediction:
        p = predictions.get(example.id)
        if p is None:
            raise KeyError(f"no prediction for {example.id}")
        if "start_scores" in p:
            return decode_span(p["start_scores"], p["end_scores"], constrained)
        return SpanPrediction(int(p["start"]), int(p["end"]))
    return predict


def gold_span_for(example: Example, context: Context) -> tuple[int, int]:
    """Annotated span on ground truth; first occurrence (or (0, 0)) on OCR output."""
    if context.source is ContextSource.GROUND_TRUTH:
        return example.pair.start, example.pair.end
    return find_answer_span(context, example.pair.answer_text) or (0, 0)


def _read_jsonl(path: Union[str, Path]) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def load_predictions(path: Union[str, Path]) -> dict[str, dict]:
    out = {}
    for p in _read_jsonl(path):
        if "id" not in p or not ({"start", "end"} <= p.keys() or {"start_scores", "end_scores"} <= p.keys()):
            raise ValueError(f"bad prediction line in {path}: {sorted(p)}")
        out[str(p["id"])] = p
    return out


def load_ocr_words(path: Union[str, Path]) -> dict[str, Context]:
    """External OCR output; boxes are taken to be in virtual coordinates already."""
    out = {}
    for line in _read_jsonl(path):
        words = tuple(w["text"] for w in line["words"])
        boxes = tuple(tuple(int(v) for v in w["bbox"]) for w in line["words"])
        out[str(line["id"])] = Context(words, boxes, ContextSource.OCR_OUTPUT)
    return out


def load_records(root: Union[str, Path], split: Optional[str] = "test") -> list[Example]:
    examples = []
    for entry in read_manifest(root):
        if split is not None and entry["split"] != split:
            continue
        ann = read_annotation(root, entry["id"])
        pair = QAPair.from_dict(ann["qa_pairs"][ann["competition_pair"]])
        examples.append(Example(entry["id"], pair, ann["structure"]))
    return examples


def evaluate(
    examples: Sequence[Example],
    predictor: Predictor,
    corruption_rate: Optional[float] = None,
    seed: int = 0,
    page: str = "table",
    ocr_contexts: Optional[dict[str, Context]] = None,
) -> dict:
    """Exact-match accuracy with an error histogram and one row per example.

    Contexts are ground truth unless ``corruption_rate`` is given (synthetic
    OCR noise) or ``ocr_contexts`` supplies external OCR output.
    """
    if not examples:
        raise ValueError("no examples to evaluate")
    rows = []
    for ex in sorted(examples, key=lambda e: e.id):
        if ocr_contexts is not None and ex.id in ocr_contexts:
            context = ocr_contexts[ex.id]
        else:
            context = context_from_structure(ex.structure, page)
            if corruption_rate is not None:
                context = corrupt_context(context, corruption_rate, _example_seed(seed, ex.id))
        gold = gold_span_for(ex, context)
        error = None
        try:
            pred = predictor(ex, context)
        except Exception as exc:  # a broken prediction counts as wrong, not as a crash
            error = f"{type(exc).__name__}: {exc}"
            pred = None
        category = classify_error(context, ex.pair, pred, gold)
        ps, pe = (pred.start, pred.end) if pred is not None else (-1, -1)
        rows.append({
            "id": ex.id,
            "gold_start": gold[0],
            "gold_end": gold[1],
            "pred_start": ps,
            "pred_end": pe,
            "category": category.value,
            "zero_assigned": gold == (0, 0),
            "error": error,
        })
    histogram = {c.value: 0 for c in ErrorCategory}
    for r in rows:
        histogram[r["category"]] += 1
    correct = histogram[ErrorCategory.CORRECT.value]
    return {
        "accuracy": correct / len(rows),
        "examples": len(rows),
        "correct": correct,
        "categories": histogram,
        "predictor_failures": sum(r["error"] is not None for r in rows),
        "rows": rows,
    }


SCATTER_COLUMNS = ("id", "gold_start", "pred_start", "gold_end", "pred_end", "category", "zero_assigned")


def emit_position_scatter(report: dict, csv_path: Union[str, Path],
                          svg_path: Optional[Union[str, Path]] = None) -> None:
    """Write gold vs predicted positions; optionally plot them (needs matplotlib)."""
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SCATTER_COLUMNS, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for r in report["rows"]:
            writer.writerow({**r, "zero_assigned": int(r["zero_assigned"])})
    if svg_path is None:
        return
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(10, 5))
    for ax, key in zip(axes, ("start", "end")):
        xs = [r[f"gold_{key}"] for r in report["rows"]]
        ys = [r[f"pred_{key}"] for r in report["rows"]]
        ax.scatter(xs, ys, s=8)
        hi = max(xs + ys + [1])
        ax.plot([0, hi], [0, hi], linewidth=0.5, color="grey")
        ax.set_xlabel(f"target {key}")
        ax.set_ylabel(f"predicted {key}")
    fig.tight_layout()
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)
