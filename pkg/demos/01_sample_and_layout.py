"""Sample one table, lay it out and print its cells and word boxes."""

from synfintabs.fonts import PillowFontMetrics
from synfintabs.layout import BUILTIN_STYLES, flatten_words, layout_table
from synfintabs.model import validate_layout
from synfintabs.sampler import GeneratorConfig, derive_table_seed, sample_spec, sample_table

config = GeneratorConfig(master_seed=42)
spec = sample_spec(derive_table_seed(config.master_seed, 0), theme=0, config=config)
table = sample_table(spec, config, table_id="demo")
print(f"theme {spec.theme}, {len(table.rows)} rows x {table.column_count} columns")
for line in table.text_grid()[:8]:
    print(" | ".join(line))

layout = layout_table(table, BUILTIN_STYLES[0].for_spec(spec), PillowFontMetrics())
validate_layout(layout, table)
print(f"page {layout.page_size}, {len(layout.words)} words; first five:")
for word, box in flatten_words(layout)[:5]:
    print(f"  {word!r:24} {box.as_list()}")
