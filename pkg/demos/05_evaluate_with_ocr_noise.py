"""Score the oracle and search predictors as OCR corruption grows."""

import shutil
import sys
from pathlib import Path

from synfintabs.builder import build_dataset
from synfintabs.evaluation import emit_position_scatter, evaluate, load_records, oracle_predictor, search_predictor
from synfintabs.sampler import GeneratorConfig

root = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/eval")
if not (root / "manifest.jsonl").exists():
    shutil.rmtree(root, ignore_errors=True)
    build_dataset(GeneratorConfig(master_seed=42), 200, root, with_a4=False)
examples = load_records(root, split=None)

print(f"oracle on ground truth: {evaluate(examples, oracle_predictor)['accuracy']:.3f}")
for rate in (0.0, 0.05, 0.1, 0.2):
    report = evaluate(examples, search_predictor, corruption_rate=rate, seed=0)
    print(f"search at corruption {rate:.2f}: accuracy {report['accuracy']:.3f} {report['categories']}")
emit_position_scatter(report, root / "scatter.csv")
print(f"scatter rows written to {root / 'scatter.csv'}")
