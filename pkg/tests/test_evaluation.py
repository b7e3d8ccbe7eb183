import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from synfintabs.evaluation import (
    Context,
    ContextSource,
    ErrorCategory,
    SpanPrediction,
    classify_error,
    context_from_structure,
    corrupt_context,
    decode_span,
    emit_position_scatter,
    evaluate,
    exact_match,
    file_predictor,
    find_answer_span,
    load_ocr_words,
    load_predictions,
    load_records,
    oracle_predictor,
    search_predictor,
)
from synfintabs.model import QAPair, make_question


def ctx(words, source=ContextSource.GROUND_TRUTH):
    return Context(tuple(words), tuple((0, 0, 1, 1) for _ in words), source)


def test_context_lengths_must_match():
    with pytest.raises(ValueError):
        Context(("a",), ())


def test_find_answer_span_examples():
    words = [f"w{i}" for i in range(60)]
    words[41] = "52,160"
    assert find_answer_span(ctx(words), "52,160") == (41, 42)
    assert find_answer_span(ctx(words), "99") is None
    words[5] = words[17] = "7"
    assert find_answer_span(ctx(words), "7") == (5, 6)
    assert find_answer_span(ctx(["Net", "book", "value"]), "book value") == (1, 3)
    assert find_answer_span(ctx(["Net", "book", "value"]), "ook value") is None


def brute_force_span(words, answer):
    for i in range(len(words)):
        for j in range(i + 1, len(words) + 1):
            if " ".join(words[i:j]) == answer:
                return i, j
    return None


@given(st.lists(st.sampled_from(["a", "b", "ab", "1,0"]), max_size=12),
       st.lists(st.sampled_from(["a", "b", "ab", "1,0"]), min_size=1, max_size=3))
def test_find_answer_span_matches_brute_force(words, answer_words):
    answer = " ".join(answer_words)
    assert find_answer_span(ctx(words), answer) == brute_force_span(words, answer)


def test_gold_contexts_first_occurrence(small_dataset):
    for ex in load_records(small_dataset, None):
        c = context_from_structure(ex.structure)
        s, e = find_answer_span(c, ex.pair.answer_text)
        assert s <= ex.pair.start
        if c.words.count(ex.pair.answer_text) == 1:
            assert (s, e) == (ex.pair.start, ex.pair.end)
        assert len(c.words) == len(c.boxes)
        assert all(0 <= v <= 1000 for b in c.boxes for v in b)
        a4 = context_from_structure(ex.structure, "a4")
        assert a4.words == c.words
        assert all(b[0] >= 40 * 1000 // 794 for b in a4.boxes)


def test_decode_span_examples():
    s = np.zeros(10)
    e = np.zeros(10)
    s[3], e[7] = 1, 1
    assert (decode_span(s, e, True).start, decode_span(s, e, True).end) == (3, 8)
    assert (decode_span(s, e, False).start, decode_span(s, e, False).end) == (3, 8)
    s = np.zeros(10)
    e = np.arange(10.0)[::-1] / 10
    s[5] = 1
    loose = decode_span(s, e, False)
    tight = decode_span(s, e, True)
    assert (loose.start, loose.end) == (5, 1)
    assert tight.start == 5 and tight.end == 6
    e[8] = 5
    assert decode_span(s, e, True).end == 9


def test_decode_span_errors_and_ties():
    with pytest.raises(ValueError):
        decode_span([1.0], [1.0], True)
    assert decode_span([1.0], [1.0], False).end == 1
    with pytest.raises(ValueError):
        decode_span([1.0, 2.0], [1.0], True)
    with pytest.raises(ValueError):
        decode_span([np.nan, 1.0], [1.0, 2.0], True)
    p = decode_span([1, 1, 0], [0, 2, 2], True)
    assert (p.start, p.end) == (0, 2)


finite = st.floats(-1e6, 1e6, allow_nan=False)


@settings(max_examples=500)
@given(st.integers(2, 30).flatmap(lambda n: st.tuples(st.lists(finite, min_size=n, max_size=n),
                                                       st.lists(finite, min_size=n, max_size=n))))
def test_constrained_decoding_properties(vectors):
    s, e = vectors
    tight = decode_span(s, e, True)
    assert 0 <= tight.start < tight.end <= len(s)
    start = int(np.argmax(s))
    best = max(range(start, len(s)), key=lambda j: (e[j], -j))
    assert (tight.start, tight.end) == (start, best + 1)
    loose = decode_span(s, e, False)
    if loose.end > loose.start:
        assert (loose.start, loose.end) == (tight.start, tight.end)


def test_exact_match_is_positional():
    assert exact_match(SpanPrediction(41, 42), 41, 42)
    assert not exact_match(SpanPrediction(41, 43), 41, 42)
    c = ctx(["x", "5", "y", "5"])
    pair = QAPair(make_question("y", "x"), "5", "y", "x", 3, 4)
    assert find_answer_span(c, "5") == (1, 2)
    assert not exact_match(SpanPrediction(1, 2), pair.start, pair.end)


def test_classify_error_categories():
    words = ["2020", "Net", "assets", "52,160"]
    pair = QAPair(make_question("Net assets", "2020"), "52,160", "Net assets", "2020", 3, 4)
    assert classify_error(ctx(words), pair, SpanPrediction(3, 4)) is ErrorCategory.CORRECT
    assert classify_error(ctx(words), pair, SpanPrediction(2, 4)) is ErrorCategory.WRONG_SPAN
    assert classify_error(ctx(["2020", "Net", "asets", "52,160"]), pair, SpanPrediction(0, 1)) \
        is ErrorCategory.HEADER_NOT_IN_CONTEXT
    assert classify_error(ctx(["2020", "Net", "assets", "52,16O"]), pair, SpanPrediction(0, 1)) \
        is ErrorCategory.ANSWER_NOT_IN_CONTEXT
    assert classify_error(ctx(words), pair, None) is ErrorCategory.WRONG_SPAN
    # a zero-assigned gold span never counts as correct
    assert classify_error(ctx(["2020", "Net", "assets"]), pair, SpanPrediction(0, 0), (0, 0)) \
        is ErrorCategory.ANSWER_NOT_IN_CONTEXT


def long_context(n=10_000):
    rng = np.random.default_rng(3)
    words = [f"{int(v):,}" for v in rng.integers(1, 10**7, n)]
    return Context(tuple(words), tuple((i % 1000, 0, i % 1000 + 1, 10) for i in range(n)))


def test_corrupt_rate_zero_and_one():
    c = long_context(500)
    zero = corrupt_context(c, 0.0, 1)
    assert zero.words == c.words and zero.boxes == c.boxes
    assert zero.source is ContextSource.OCR_OUTPUT
    log = []
    corrupt_context(c, 1.0, 1, log)
    assert len(log) == len(c.words)
    assert all(op["result"] != op["word"] for op in log)
    assert {op["op"] for op in log} == {"substitute", "drop", "split"}


def test_corrupt_rate_frequency():
    c = long_context()
    log = []
    out = corrupt_context(c, 0.05, 11, log)
    assert abs(len(log) / len(c.words) - 0.05) <= 0.01
    drops = sum(op["op"] == "drop" for op in log)
    splits = sum(op["op"] == "split" for op in log)
    assert len(out.words) == len(c.words) - drops + splits
    assert len(out.words) == len(out.boxes)


def test_corruption_is_nested_and_deterministic():
    c = long_context(3000)
    assert corrupt_context(c, 0.1, 4) == corrupt_context(c, 0.1, 4)
    lo, hi = [], []
    corrupt_context(c, 0.05, 4, lo)
    corrupt_context(c, 0.10, 4, hi)
    hi_by_index = {op["index"]: op for op in hi}
    assert all(hi_by_index[op["index"]] == op for op in lo)


def test_split_boxes_partition_original():
    c = Context(("123456",), ((100, 10, 160, 20),))
    log = []
    for seed in range(50):
        out = corrupt_context(c, 1.0, seed, log)
        if len(out.words) == 2:
            (a, b) = out.boxes
            assert a[0] == 100 and b[2] == 160 and a[2] == b[0]
            assert "".join(out.words) == "123456"
            return
    pytest.fail("no split drawn")


def test_evaluate_oracle_and_search(small_dataset):
    examples = load_records(small_dataset, None)
    report = evaluate(examples, oracle_predictor)
    assert report["accuracy"] == 1.0 and report["examples"] == len(examples)
    noisy = evaluate(examples, search_predictor, corruption_rate=0.2, seed=3)
    assert noisy["accuracy"] < 1.0
    assert noisy["categories"]["WrongSpan"] == 0
    for row in noisy["rows"]:
        if row["category"] != "Correct":
            assert row["zero_assigned"]
    with pytest.raises(ValueError):
        evaluate([], oracle_predictor)


def test_predictor_failures_count_as_wrong(small_dataset):
    examples = load_records(small_dataset, None)[:5]

    def broken(example, context):
        raise RuntimeError("model crashed")

    report = evaluate(examples, broken)
    assert report["accuracy"] == 0.0
    assert report["predictor_failures"] == 5
    assert all(r["error"].startswith("RuntimeError") for r in report["rows"])


def test_file_predictions(tmp_path, small_dataset):
    examples = load_records(small_dataset, None)
    lines = []
    for k, ex in enumerate(examples):
        if k % 2:
            lines.append({"id": ex.id, "start": ex.pair.start, "end": ex.pair.end})
        else:
            n = ex.pair.end + 3
            s = [0.0] * n
            e = [0.0] * n
            s[ex.pair.start] = 1.0
            e[ex.pair.end - 1] = 1.0
            e[0] = 2.0  # an invalid end peak that constrained decoding must skip
            lines.append({"id": ex.id, "start_scores": s, "end_scores": e})
    path = tmp_path / "pred.jsonl"
    path.write_text("\n".join(json.dumps(x) for x in lines[:-1]) + "\n")
    preds = load_predictions(path)
    tight = evaluate(examples, file_predictor(preds, constrained=True))
    assert tight["correct"] == len(examples) - 1
    assert tight["predictor_failures"] == 1
    loose = evaluate(examples, file_predictor(preds, constrained=False))
    assert loose["correct"] < tight["correct"]
    path.write_text('{"id": "x"}\n')
    with pytest.raises(ValueError):
        load_predictions(path)


def test_external_ocr_contexts(tmp_path, small_dataset):
    ex = load_records(small_dataset, None)[0]
    c = context_from_structure(ex.structure)
    words = [{"text": w, "bbox": list(b)} for w, b in zip(c.words, c.boxes)]
    path = tmp_path / "ocr.jsonl"
    path.write_text(json.dumps({"id": ex.id, "words": words}) + "\n")
    ocr = load_ocr_words(path)
    assert ocr[ex.id].source is ContextSource.OCR_OUTPUT
    report = evaluate([ex], search_predictor, ocr_contexts=ocr)
    assert report["accuracy"] == 1.0


def test_scatter_file(tmp_path, small_dataset):
    examples = load_records(small_dataset, None)
    report = evaluate(examples, search_predictor, corruption_rate=0.3, seed=1)
    out = tmp_path / "scatter.csv"
    emit_position_scatter(report, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "id,gold_start,pred_start,gold_end,pred_end,category,zero_assigned"
    assert len(lines) - 1 == len(examples)
    rows = [dict(zip(lines[0].split(","), l.split(","))) for l in lines[1:]]
    zero = [r for r in rows if r["zero_assigned"] == "1"]
    not_found = sum(r["category"] == "AnswerNotInContext" for r in rows)
    assert all(r["gold_start"] == "0" for r in zero)
    assert len(zero) >= not_found
    ok = evaluate(examples, oracle_predictor)
    emit_position_scatter(ok, out)
    for l in out.read_text().splitlines()[1:]:
        _, gs, ps, ge, pe, *_ = l.split(",")
        assert (gs, ge) == (ps, pe)


def test_scatter_svg(tmp_path, small_dataset):
    pytest.importorskip("matplotlib")
    report = evaluate(load_records(small_dataset, None)[:10], oracle_predictor)
    emit_position_scatter(report, tmp_path / "s.csv", tmp_path / "s.svg")
    assert (tmp_path / "s.svg").read_text().lstrip().startswith("<?xml")

