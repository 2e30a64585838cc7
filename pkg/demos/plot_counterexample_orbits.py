"""
Arrow-Hurwicz orbits versus PDHG on x - xy + y
==============================================

The bilinear function ``x - xy + y`` has its saddle point at (1, 1). Without
the momentum step the proximal Arrow-Hurwicz iteration circles the saddle for
every step size in (0, 2); PDHG lands on it after two steps.
"""

import sys
from pathlib import Path

import numpy as np

from saddlekit import export, orbit_invariant, plotting, make_counterexample, run, StepSchedule

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output")
p = make_counterexample()

# s = 1: a closed loop through six lattice points
tr = run(p, "arrow-hurwicz", StepSchedule.from_s(1.0), [0.0], [1.0], 6)
print("Arrow-Hurwicz, s=1:", [(float(x[0]), float(y[0])) for x, y in zip(tr.xs, tr.ys)])

# other step sizes trace ellipses u^2 + v^2 + s u v = const around the saddle
for s in (0.5, 1.5, 1.9):
    tr = run(p, "arrow-hurwicz", StepSchedule.from_s(s), [0.0], [1.0], 2000, demonstration=True)
    Q = orbit_invariant(tr.xs[:, 0], tr.ys[:, 0], s)
    dist = np.hypot(tr.xs[:, 0] - 1, tr.ys[:, 0] - 1).min()
    print(f"s={s}: invariant drift {np.ptp(Q):.1e}, closest approach to the saddle {dist:.3f}")
    table = {"x_0": tr.xs[:, 0], "y_0": tr.ys[:, 0]}
    spec = plotting.PlotSpec("trajectory-2d", ["x_0", "y_0"], title=f"Arrow-Hurwicz, s={s}",
                             saddle=(1.0, 1.0))
    plotting.emit_svg(table, spec, out / f"arrow_hurwicz_s{s}.svg")

# PDHG with the same start reaches (1, 1) at k = 2 and stays there
tr = run(p, "pdhg", StepSchedule.from_s(1.0), [0.0], [1.0], 5)
print("PDHG, s=1:", [(float(x[0]), float(y[0])) for x, y in zip(tr.xs, tr.ys)])
export.atomic_write(out / "pdhg_counterexample.csv", export.trace_csv(tr))
print("wrote", sorted(f.name for f in out.iterdir()))
