"""CSV data files and the versioned model serialization format.

Models are stored as JSON with full-precision floats (shortest round-trip
representation), so save -> load reproduces every entry bit-exactly.  Exact
zeros in the precision matrix are written as integer 0 to keep the sparsity
pattern visible in the file.
"""

import csv
import json

import numpy as np

from .em import GaussianModel
from .exceptions import CsvFormatError

SCHEMA_VERSION = 1
MISSING_TOKENS = {"", "NA"}


def _parse_cell(token, line):
    token = token.strip()
    if token in MISSING_TOKENS:
        return np.nan
    try:
        return float(token)
    except ValueError:
        raise CsvFormatError(f"line {line}: cannot parse {token!r} as a number",
                             line=line) from None


def read_matrix_csv(path, header=True):
    """Read a numeric CSV into an array with NaN at missing cells.

    Returns (values, column_names); names is None without a header row.
    """
    values, names, _ = read_matrix_csv_raw(path, header=header)
    return values, names


def _is_numeric_row(cells):
    for cell in cells:
        cell = cell.strip()
        if cell in MISSING_TOKENS:
            continue
        try:
            float(cell)
        except ValueError:
            return False
    return True


def read_matrix_csv_raw(path, header=True):
    """Like :func:`read_matrix_csv`, also returning the raw cell strings.

    The raw strings let writers reproduce observed cells byte-identically.
    ``header`` may be True, False, or "auto" (header assumed only when the
    first row does not parse as numbers).
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows:
        raise CsvFormatError("empty file", line=1)
    if header == "auto":
        header = not _is_numeric_row(rows[0])
    names = None
    start = 0
    if header:
        names = [c.strip() for c in rows[0]]
        start = 1
    raw = rows[start:]
    if not raw:
        raise CsvFormatError("no data rows", line=start + 1)
    width = len(raw[0])
    parsed = np.empty((len(raw), width))
    for i, row in enumerate(raw):
        line = start + i + 1
        if len(row) != width:
            raise CsvFormatError(
                f"line {line}: expected {width} fields, found {len(row)}", line=line)
        for j, cell in enumerate(row):
            parsed[i, j] = _parse_cell(cell, line)
    if names is not None and len(names) != width:
        raise CsvFormatError(f"header has {len(names)} fields, rows have {width}",
                             line=1)
    return parsed, names, raw


def read_vector_csv(path, header=True):
    """Read a single-column CSV as a 1-D float vector."""
    values, _ = read_matrix_csv(path, header=header)
    if values.shape[1] != 1:
        raise CsvFormatError(f"expected one column, found {values.shape[1]}", line=1)
    return values[:, 0]


def format_float(x):
    """Full-precision decimal used for imputed values (17 significant digits)."""
    return format(float(x), ".17g")


def _matrix_to_jsonable(k):
    out = []
    for row in np.asarray(k, dtype=float):
        out.append([0 if v == 0.0 else float(v) for v in row])
    return out


def save_model(path, model, lam=None, report=None, extra=None):
    """Write a fitted Gaussian model (and fit metadata) as JSON."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "gaussian",
        "p": int(model.p),
        "mu": [float(v) for v in model.mu],
        "K": _matrix_to_jsonable(model.K),
        "lambda": None if lam is None else float(lam),
    }
    if report is not None:
        doc["em_iterations"] = int(report.em_iterations)
        doc["converged"] = bool(report.converged)
        doc["objective"] = float(report.objective_trace[-1])
        doc["objective_trace"] = [float(v) for v in report.objective_trace]
        doc["init"] = report.init
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_model(path):
    """Load a Gaussian model file; returns (GaussianModel, metadata dict)."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {doc.get('schema_version')!r}")
    model = GaussianModel(mu=np.array(doc["mu"], dtype=float),
                          K=np.array(doc["K"], dtype=float))
    return model, doc


def save_regression_model(path, model, lam1=None, lam2=None, report=None,
                          centers=None):
    """Write a fitted two-stage regression model as JSON."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "regression",
        "p": int(model.beta.shape[0]),
        "beta": [0 if v == 0.0 else float(v) for v in model.beta],
        "sigma": float(model.sigma),
        "mu": [float(v) for v in model.x_model.mu],
        "K": _matrix_to_jsonable(model.x_model.K),
        "lambda1": None if lam1 is None else float(lam1),
        "lambda2": None if lam2 is None else float(lam2),
    }
    if report is not None:
        doc["em_iterations"] = int(report.em_iterations)
        doc["converged"] = bool(report.converged)
        doc["objective"] = float(report.objective_trace[-1])
    if centers is not None:
        doc["y_center"] = float(centers[0])
        doc["x_centers"] = [float(v) for v in centers[1]]
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_regression_model(path):
    from .two_stage import JointModel

    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("kind") != "regression":
        raise ValueError("not a regression model file")
    x_model = GaussianModel(mu=np.array(doc["mu"], dtype=float),
                            K=np.array(doc["K"], dtype=float))
    model = JointModel(beta=np.array(doc["beta"], dtype=float),
                       sigma=float(doc["sigma"]), x_model=x_model)
    return model, doc


RESULTS_HEADER = "method,missing_pct,run,kl_loss,tpr,tnr,l2,runtime_s,em_iters"


def write_results_csv(rows, path, timing=False):
    """Write scenario result rows with the fixed header.

    ``runtime_s`` is wall-clock and is left empty unless ``timing`` is set,
    so that repeated runs with the same seed produce byte-identical files.
    """
    def fmt(v):
        if v is None:
            return ""
        if isinstance(v, float):
            return repr(v)
        return str(v)

    with open(path, "w", newline="\n") as fh:
        fh.write(RESULTS_HEADER + "\n")
        for r in rows:
            runtime = fmt(r.runtime_s) if timing else ""
            fields = [r.method, fmt(r.missing_pct), str(r.run), fmt(r.kl_loss),
                      fmt(r.tpr), fmt(r.tnr), fmt(r.l2), runtime,
                      fmt(r.em_iters)]
            fh.write(",".join(fields) + "\n")


def write_heatmap_csv(path, frequencies):
    """Write a p x p matrix of zero-identification frequencies."""
    arr = np.asarray(frequencies, dtype=float)
    with open(path, "w", newline="\n") as fh:
        for row in arr:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
