"""
Proximal maps and conjugate pairs
=================================

Each function kind has a closed-form proximal map and a conjugate of a
supported kind, so the Moreau identity ``v = prox_{tf}(v) + t prox_{f*/t}(v/t)``
can be checked directly.
"""

import numpy as np

from saddlekit import functions as fn

rng = np.random.default_rng(0)
v = rng.standard_normal(4) * 2
t = 0.7
kinds = [
    fn.ScaledL1(0.5),
    fn.IndicatorLinfBall(1.0),
    fn.Quadratic(np.diag([1.0, 2.0, 3.0, 4.0]), np.ones(4)),
    fn.Linear(np.arange(4.0)),
    fn.Zero(),
]
print("v =", np.round(v, 4))
for f in kinds:
    p = f.prox(t, v)
    back = p + t * f.conjugate().prox(1 / t, v / t)
    print(f"{type(f).__name__:18s} prox = {np.round(p, 4)}  conjugate: {type(f.conjugate()).__name__:18s}"
          f" Moreau error {np.abs(back - v).max():.1e}")

print("soft threshold of", np.round(v, 3), "at 1:", np.round(fn.soft_threshold(v, 1.0), 3))
