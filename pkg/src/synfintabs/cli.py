"""Command-line entry point: generate, validate, eval, stats.

Machine-readable JSON goes to stdout; logs and progress go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .builder import build_dataset, stats
from .evaluation import (
    emit_position_scatter,
    evaluate,
    file_predictor,
    load_ocr_words,
    load_predictions,
    load_records,
    oracle_predictor,
    search_predictor,
)
from .export import MANIFEST, from_structure, parse_csv, parse_html, read_manifest, structure_grid
from .layout import BUILTIN_STYLES, load_styles
from .model import LayoutValidationError, QAPair, SynFinTabsError, validate_layout
from .sampler import GeneratorConfig, load_config

log = logging.getLogger("synfintabs")

ENV_OUT = "SYNFINTABS_OUT"
ENV_WORKERS = "SYNFINTABS_WORKERS"


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _themes(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"themes must be comma-separated integers, got {text!r}")


def _rate(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must be in [0, 1], got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="synfintabs", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a dataset")
    g.add_argument("--total", type=_positive_int, required=True)
    g.add_argument("--seed", type=int, default=None, help="master seed (default: config or 0)")
    g.add_argument("--out", default=os.environ.get(ENV_OUT), help=f"output root (env {ENV_OUT})")
    g.add_argument("--workers", type=_positive_int, default=int(os.environ.get(ENV_WORKERS, "1")),
                   help=f"worker processes (env {ENV_WORKERS})")
    g.add_argument("--config", help="YAML or JSON generator config")
    g.add_argument("--themes", type=_themes, help="comma-separated theme subset, e.g. 0,2")
    g.add_argument("--a4", dest="a4", action="store_true", default=True, help="also write A4 images (default)")
    g.add_argument("--no-a4", dest="a4", action="store_false")

    v = sub.add_parser("validate", help="check a generated dataset")
    v.add_argument("--in", dest="input", required=True)

    e = sub.add_parser("eval", help="exact-match evaluation on the test split")
    e.add_argument("--in", dest="input", required=True)
    src = e.add_mutually_exclusive_group()
    src.add_argument("--predictions", help="JSONL of {id,start,end} or {id,start_scores,end_scores}")
    src.add_argument("--predictor", choices=("oracle", "search"), default="oracle")
    e.add_argument("--corrupt-rate", type=_rate, default=None, help="simulate OCR noise at this rate")
    e.add_argument("--corrupt-seed", type=int, default=0)
    e.add_argument("--ocr", help="JSONL of external OCR words {id, words:[{text,bbox}]}")
    e.add_argument("--constrained", action="store_true", help="decode score vectors with end after start")
    e.add_argument("--page", choices=("table", "a4"), default="table", help="coordinate frame for contexts")
    e.add_argument("--split", default="test")
    e.add_argument("--scatter-out", help="write gold/predicted positions CSV here")
    e.add_argument("--scatter-svg", help="also plot the scatter (needs matplotlib)")

    s = sub.add_parser("stats", help="dataset statistics")
    s.add_argument("--in", dest="input", required=True)
    return parser


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def cmd_generate(args) -> int:
    if not args.out:
        raise SynFinTabsError(f"no output root: pass --out or set {ENV_OUT}")
    overrides = {} if args.seed is None else {"master_seed": args.seed}
    if args.config:
        config = load_config(args.config, **overrides)
        styles = load_styles(args.config)
    else:
        config = GeneratorConfig(**overrides)
        styles = BUILTIN_STYLES
    if args.themes:
        config = config.with_themes(args.themes)
    summary = build_dataset(config, args.total, args.out, args.workers, styles=styles,
                            with_a4=args.a4, progress=True)
    _emit(summary)
    return 0


def _check_record(root: Path, entry: dict) -> dict[str, list[str]]:
    """Problems with one record, keyed by check name."""
    problems: dict[str, list[str]] = {}
    rid = entry["id"]
    missing = [rel for rel in entry["paths"].values() if not (root / rel).exists()]
    if missing:
        problems["manifest"] = [f"{rid}: missing {m}" for m in missing]
        return problems
    try:
        ann = json.loads((root / entry["paths"]["annotation"]).read_text(encoding="utf-8"))
        table, layout = from_structure(ann["structure"])
    except (ValueError, KeyError, TypeError) as exc:
        problems["annotation"] = [f"{rid}: unreadable annotation: {exc}"]
        return problems
    if ann.get("id") != rid or ann.get("split") != entry["split"] or ann.get("theme") != entry["theme"]:
        problems.setdefault("manifest", []).append(f"{rid}: annotation disagrees with manifest entry")
    try:
        validate_layout(layout, table)
    except LayoutValidationError as exc:
        problems["geometry"] = [f"{rid}: {p}" for p in exc.problems]

    words = [w.text for w in layout.words]
    bad = []
    for k, d in enumerate(ann["qa_pairs"]):
        try:
            pair = QAPair.from_dict(d)
        except (ValueError, KeyError) as exc:
            bad.append(f"{rid} pair {k}: {exc}")
            continue
        if " ".join(words[pair.start:pair.end]) != pair.answer_text:
            bad.append(f"{rid} pair {k}: span [{pair.start},{pair.end}) does not spell {pair.answer_text!r}")
    if not ann["qa_pairs"] or not 0 <= ann.get("competition_pair", -1) < len(ann["qa_pairs"]):
        bad.append(f"{rid}: no valid competition pair")
    if bad:
        problems["spans"] = bad

    grid = structure_grid(ann["structure"])
    html_grid, _ = parse_html(ann["html"])
    csv_grid = parse_csv(ann["csv"])
    if not grid == html_grid == csv_grid:
        problems["consistency"] = [f"{rid}: HTML, CSV and structure grids differ"]
    return problems


def cmd_validate(args) -> int:
    root = Path(args.input)
    if not (root / MANIFEST).exists():
        raise SynFinTabsError(f"{root} has no {MANIFEST}")
    entries = read_manifest(root)
    if not entries:
        raise SynFinTabsError(f"{root / MANIFEST} is empty")
    checks = {name: [] for name in ("manifest", "annotation", "geometry", "spans", "consistency")}
    ids = [e["id"] for e in entries]
    if len(set(ids)) != len(ids):
        checks["manifest"].append("duplicate ids in manifest")
    on_disk = {p.stem for p in (root / "annotations").glob("*.json")}
    extra = sorted(on_disk - set(ids))
    if extra:
        checks["manifest"].append(f"annotations not in manifest: {extra[:10]}")
    for entry in entries:
        for name, found in _check_record(root, entry).items():
            checks[name].extend(found)
    report = {
        "records": len(entries),
        "checks": {name: {"passed": not found, "failures": len(found), "examples": found[:10]}
                   for name, found in checks.items()},
    }
    report["passed"] = all(c["passed"] for c in report["checks"].values())
    _emit(report)
    for name, found in checks.items():
        log.info("%s: %s", name, "pass" if not found else f"FAIL ({len(found)})")
    return 0 if report["passed"] else 1


def cmd_eval(args) -> int:
    examples = load_records(args.input, args.split)
    if not examples:
        raise SynFinTabsError(f"no {args.split} examples in {args.input}")
    if args.predictions:
        if not Path(args.predictions).exists():
            raise SynFinTabsError(f"predictions file {args.predictions} not found")
        predictor = file_predictor(load_predictions(args.predictions), args.constrained)
        name = "file"
    else:
        predictor = oracle_predictor if args.predictor == "oracle" else search_predictor
        name = args.predictor
    ocr = load_ocr_words(args.ocr) if args.ocr else None
    report = evaluate(examples, predictor, args.corrupt_rate, args.corrupt_seed, args.page, ocr)
    if args.scatter_out:
        emit_position_scatter(report, args.scatter_out, args.scatter_svg)
    out = {k: v for k, v in report.items() if k != "rows"}
    out.update({"predictor": name, "split": args.split, "corrupt_rate": args.corrupt_rate})
    _emit(out)
    return 0


def cmd_stats(args) -> int:
    root = Path(args.input)
    if not root.is_dir():
        raise SynFinTabsError(f"{root} is not a directory")
    _emit(stats(root))
    return 0


COMMANDS = {"generate": cmd_generate, "validate": cmd_validate, "eval": cmd_eval, "stats": cmd_stats}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (SynFinTabsError, ValueError, OSError) as exc:
        print(f"synfintabs {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
