"""Constrained versus unconstrained span decoding on hand-made scores."""

import numpy as np

from synfintabs.evaluation import decode_span

start = [0.1, 0.2, 3.0, 0.4, 0.1, 0.0]
end = [2.5, 0.1, 0.3, 1.0, 0.2, 0.1]
for constrained in (False, True):
    p = decode_span(start, end, constrained=constrained)
    print(f"constrained={constrained}: start {p.start}, end {p.end}")

rng = np.random.default_rng(0)
inverted = sum(
    (lambda p: p.end <= p.start)(decode_span(rng.normal(size=20), rng.normal(size=20), constrained=False))
    for _ in range(1000)
)
print(f"unconstrained decoding inverted {inverted} of 1000 random spans; constrained never does")
