"""Generate QA pairs for a table and show the HTML, CSV and structure exports."""

import json

from synfintabs.builder import TablePlan, build_table
from synfintabs.export import parse_csv, parse_html, structure_grid, to_csv, to_html, to_structure_json
from synfintabs.model import Split
from synfintabs.qa import select_competition_pair
from synfintabs.sampler import GeneratorConfig

built = build_table(TablePlan(3, 1, Split.TEST), GeneratorConfig(master_seed=42))
words = built.table.flattened_words()
chosen = select_competition_pair(built.qa_pairs, built.seed)
print(f"{len(built.qa_pairs)} QA pairs, competition pair #{chosen}")
for pair in built.qa_pairs[:5]:
    span = " ".join(words[pair.start:pair.end])
    print(f"  {pair.question!r} -> {pair.answer_text!r} words[{pair.start}:{pair.end}] = {span!r}")

html = to_html(built.table, built.style)
csv_text = to_csv(built.table)
structure = json.loads(to_structure_json(built.table, built.layout))
same = parse_html(html)[0] == parse_csv(csv_text) == structure_grid(structure)
print(f"HTML {len(html)} chars, CSV {len(csv_text)} chars, grids agree: {same}")
print(csv_text.splitlines()[0])
