"""CSV ingestion, centering, lagging, config files and result emission."""

import csv
import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import DataError, ParameterError

__all__ = [
    "Dataset",
    "parse_columns",
    "load_csv",
    "center_columns",
    "build_lagged_design",
    "read_config",
    "write_matrix",
    "read_matrix",
    "emit_result",
]


@dataclass(frozen=True)
class Dataset:
    values: np.ndarray
    column_names: tuple
    response_columns: tuple = ()
    predictor_columns: tuple = ()
    centered: bool = False
    centering_means: np.ndarray | None = None
    degenerate_columns: tuple = ()

    def __post_init__(self):
        overlap = set(self.response_columns) & set(self.predictor_columns)
        if overlap:
            names = ", ".join(self.column_names[j] for j in sorted(overlap))
            raise DataError(f"response and predictor columns overlap: {names}")

    @property
    def X(self):
        return self.values[:, list(self.predictor_columns)]

    @property
    def Y(self):
        return self.values[:, list(self.response_columns)]

    @property
    def predictor_names(self):
        return [self.column_names[j] for j in self.predictor_columns]

    @property
    def response_names(self):
        return [self.column_names[j] for j in self.response_columns]

    def predict(self, B, X_new):
        """Forecasts on the original scale: centered inputs, coefficients, means added back."""
        X_new = np.asarray(X_new, dtype=float)
        if not self.centered:
            return X_new @ B
        mx = self.centering_means[list(self.predictor_columns)]
        my = self.centering_means[list(self.response_columns)]
        return (X_new - mx) @ B + my


def parse_columns(spec, names):
    """Column selection from 1-based indices, inclusive ranges ``a-b`` or names."""
    if spec is None or spec == "":
        return ()
    out = []
    lookup = {name: j for j, name in enumerate(names)}
    for item in str(spec).split(","):
        item = item.strip()
        if not item:
            continue
        if item in lookup:
            out.append(lookup[item])
            continue
        lo, sep, hi = item.partition("-")
        try:
            a = int(lo)
            b = int(hi) if sep else a
        except ValueError:
            raise DataError(f"unknown column {item!r}") from None
        if not 1 <= a <= b <= len(names):
            raise DataError(f"column range {item!r} outside 1..{len(names)}")
        out.extend(range(a - 1, b))
    if len(set(out)) != len(out):
        raise DataError(f"column selection {spec!r} repeats a column")
    return tuple(out)


def load_csv(path, responses=None, predictors=None):
    """Read a numeric CSV with a header row.

    ``predictors=None`` takes every column not listed as a response.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path} is empty")
    names = tuple(h.strip() for h in rows[0])
    if len(set(names)) != len(names):
        raise DataError(f"{path}: duplicate column names in the header")
    body = rows[1:]
    if not body:
        raise DataError(f"{path} has a header but no data rows")
    values = np.empty((len(body), len(names)))
    for i, row in enumerate(body, start=2):
        if len(row) != len(names):
            raise DataError(f"{path}: line {i} has {len(row)} fields, expected {len(names)}")
        for j, cell in enumerate(row):
            cell = cell.strip()
            if cell == "":
                raise DataError(f"{path}: missing value at line {i}, column {names[j]!r}")
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: non-numeric value {cell!r} at line {i}, column {names[j]!r}") from None
            if not math.isfinite(v):
                raise DataError(f"{path}: non-finite value at line {i}, column {names[j]!r}")
            values[i - 2, j] = v
    resp = parse_columns(responses, names)
    if predictors is None:
        pred = tuple(j for j in range(len(names)) if j not in set(resp))
    else:
        pred = parse_columns(predictors, names)
    if responses is not None and not resp:
        raise DataError("the response selection is empty")
    return Dataset(values, names, resp, pred)


def center_columns(ds):
    """Subtract column means; constant columns become zero and are flagged."""
    if ds.values.shape[0] < 2:
        raise DataError("centering needs at least two rows")
    means = ds.values.mean(axis=0)
    centered = ds.values - means
    spread = np.max(np.abs(ds.values), axis=0)
    degenerate = tuple(
        int(j) for j in np.flatnonzero(np.max(np.abs(centered), axis=0) <= 1e-12 * np.maximum(spread, 1.0))
        if j in set(ds.predictor_columns)
    )
    centered[:, list(degenerate)] = 0.0
    return replace(ds, values=centered, centered=True, centering_means=means, degenerate_columns=degenerate)


def build_lagged_design(ds, lags, columns=None):
    """Responses at time t with the selected series at lags 1..L as predictors.

    Predictor columns are named ``<series>.lag<k>`` and the result has ``L``
    fewer rows than the input.
    """
    if int(lags) != lags or lags < 1:
        raise ParameterError(f"lags must be a positive integer, got {lags!r}")
    series = tuple(range(len(ds.column_names))) if columns is None else tuple(columns)
    T = ds.values.shape[0]
    if T <= lags:
        raise DataError(f"{T} rows cannot support {lags} lags")
    targets = ds.response_columns or series
    blocks = [ds.values[lags:, list(targets)]]
    names = [ds.column_names[j] for j in targets]
    for k in range(1, lags + 1):
        blocks.append(ds.values[lags - k : T - k, list(series)])
        names.extend(f"{ds.column_names[j]}.lag{k}" for j in series)
    values = np.hstack(blocks)
    n_t = len(targets)
    return Dataset(values, tuple(names), tuple(range(n_t)), tuple(range(n_t, len(names))))


def read_config(path):
    """Flat ``key = value`` file; ``#`` starts a comment.  Values stay strings."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    for num, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ParameterError(f"{path}:{num}: expected 'key = value'")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def write_matrix(path, A, header=None):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        for row in A:
            w.writerow(["%.17g" % v for v in row])


def read_matrix(path, header=True):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if header:
        rows = rows[1:]
    return np.array([[float(v) for v in row] for row in rows])


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


def emit_result(out_dir, summary, matrices=None, tables=None):
    """Write ``summary.json`` plus one CSV per matrix and table.

    ``matrices`` maps a file stem to ``(array, header)``; ``tables`` maps a stem
    to a list of dict rows sharing keys.  Output contains no timestamps, so equal
    inputs give byte-identical files.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append("summary.json")
    for stem, (A, header) in (matrices or {}).items():
        write_matrix(os.path.join(out_dir, f"{stem}.csv"), A, header)
        written.append(f"{stem}.csv")
    for stem, rows in (tables or {}).items():
        path = os.path.join(out_dir, f"{stem}.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if rows:
                keys = list(rows[0])
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(keys)
                for row in rows:
                    w.writerow([_cell(row[k]) for k in keys])
        written.append(f"{stem}.csv")
    return written


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)
