"""CSV and JSON export of traces and reports, written atomically."""

import csv
import io
import json
import os
import tempfile

import numpy as np

__all__ = [
    "SERIES_COLUMNS",
    "format_number",
    "trace_header",
    "trace_table",
    "trace_rows",
    "trace_csv",
    "trajectory_csv",
    "report_json",
    "atomic_write",
    "read_csv",
]

SERIES_COLUMNS = ("lyapunov_saddle", "lyapunov_anchor", "ne", "vi_gap_saddle", "dist_sq_avg_x")


def format_number(v):
    """17 significant digits; non-finite values as ``nan``, ``inf`` or ``-inf``."""
    v = float(v)
    if np.isnan(v):
        return "nan"
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def trace_header(d1, d2):
    return (["k"] + [f"x_{i}" for i in range(d1)] + [f"y_{i}" for i in range(d2)]
            + list(SERIES_COLUMNS))


def _series_table(report, n):
    """Per-row series; ``ne`` row ``k`` is the step ``k -> k+1`` (the last row is ``nan``)."""
    table = {c: np.full(n, np.nan) for c in SERIES_COLUMNS}
    if report is None:
        return table
    table["lyapunov_saddle"] = np.asarray(report.lyapunov, float)
    table["lyapunov_anchor"] = np.asarray(report.lyapunov_anchor, float)
    table["ne"][: len(report.ne)] = report.ne
    table["vi_gap_saddle"] = np.asarray(report.vi_gap, float)
    table["dist_sq_avg_x"] = np.asarray(report.avg_dist_sq, float)
    return table


def trace_table(trace, report=None):
    """Mapping from CSV column name to values."""
    xs, ys = trace.xs, trace.ys
    table = {"k": np.array([r.k for r in trace.records], float)}
    table.update({f"x_{i}": xs[:, i] for i in range(xs.shape[1])})
    table.update({f"y_{i}": ys[:, i] for i in range(ys.shape[1])})
    table.update(_series_table(report, len(trace)))
    return table


def trace_rows(trace, report=None):
    """Header and rows of the trace table as lists of strings."""
    xs, ys = trace.xs, trace.ys
    n = len(trace)
    header = trace_header(xs.shape[1], ys.shape[1])
    table = _series_table(report, n)
    rows = []
    for i, rec in enumerate(trace.records):
        row = [str(rec.k)] + [format_number(v) for v in xs[i]] + [format_number(v) for v in ys[i]]
        row += [format_number(table[c][i]) for c in SERIES_COLUMNS]
        rows.append(row)
    return header, rows


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def trace_csv(trace, report=None):
    return _csv_text(*trace_rows(trace, report))


def trajectory_csv(states):
    """Continuous trajectory table with columns ``t, X_i, Y_i``."""
    d1, d2 = len(states[0].X), len(states[0].Y)
    header = ["t"] + [f"X_{i}" for i in range(d1)] + [f"Y_{i}" for i in range(d2)]
    rows = [[format_number(st.t)] + [format_number(v) for v in st.X]
            + [format_number(v) for v in st.Y] for st in states]
    return _csv_text(header, rows)


def report_json(report, trace=None, extra=None):
    doc = {}
    if trace is not None:
        doc["metadata"] = trace.metadata
    if report is not None:
        doc.update(report.to_dict())
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def atomic_write(path, text):
    """Write ``text`` to a temporary file next to ``path`` and rename it into place."""
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def read_csv(path):
    """Return ``(header, columns)`` with each column as a float array."""
    with open(path, newline="") as fh:
        header, *rows = list(csv.reader(fh))
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return header, {name: data[:, i] for i, name in enumerate(header)}
