"""
Running experiments from a JSON config
======================================

The ``saddlekit`` command reads a config, runs the solver and writes a CSV
trace, a JSON report and an SVG plot. This script drives it in-process.
"""

import json
import sys
from pathlib import Path

from saddlekit.cli import main

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output") / "cli"
out.mkdir(parents=True, exist_ok=True)
config = {
    "problem": {"kind": "random_lasso", "d1": 6, "seed": 1, "difference": True},
    "algorithm": "pdhg",
    "schedule": {"s": 0.5},
    "iterations": 300,
    "outputs": {"svg": "ne.svg"},
    "plot": {"kind": "series-loglog", "columns": ["ne", "lyapunov_saddle"]},
}
path = out / "lasso.json"
path.write_text(json.dumps(config, indent=2))

print("exit code", main(["run", str(path), "--out-dir", str(out / "run")]))
print("exit code", main(["sweep", str(path), "--param", "s", "--values", "0.1,0.3,0.5",
                         "--out-dir", str(out / "sweep")]))
print("exit code", main(["counterexample", "--algorithm", "arrow-hurwicz", "--s", "1", "--steps", "6",
                         "--out-dir", str(out / "orbit")]))
