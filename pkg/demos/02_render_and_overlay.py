"""Render a table per theme, paste it on A4 and save an annotation overlay."""

import sys
from pathlib import Path

from synfintabs.builder import TablePlan, build_table
from synfintabs.model import Split
from synfintabs.render import annotation_overlay, paste_on_a4, render
from synfintabs.sampler import GeneratorConfig

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/render")
out.mkdir(parents=True, exist_ok=True)
config = GeneratorConfig(master_seed=42)
for theme in range(6):
    built = build_table(TablePlan(theme, theme, Split.TRAIN), config)
    image = render(built.layout, built.table, built.style)
    a4, placement = paste_on_a4(image)
    image.save(out / f"theme{theme}.png")
    a4.save(out / f"theme{theme}_a4.png")
    annotation_overlay(image, built.layout).save(out / f"theme{theme}_overlay.png")
    print(f"theme {theme}: {image.size[0]}x{image.size[1]} px at {built.style.font_size_pt}pt, "
          f"A4 scale {placement.scale}")
print(f"images written to {out}")
