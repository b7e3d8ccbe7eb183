"""Build a small dataset on disk and print its summary and statistics."""

import json
import shutil
import sys
from pathlib import Path

from synfintabs.builder import build_dataset, stats
from synfintabs.sampler import GeneratorConfig

root = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/dataset")
shutil.rmtree(root, ignore_errors=True)
summary = build_dataset(GeneratorConfig(master_seed=42), 60, root)
print(json.dumps(summary, indent=2))
report = stats(root)
print(f"QA pairs {report['qa_pairs_total']}, empty cell rate {report['empty_cell_rate']}, "
      f"negative rate {report['negative_value_rate']}")
