"""Model JSON files, data CSV files and atomic output writing."""

from __future__ import annotations

import csv
import json
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InvalidData
from .estimation import FittedModel, information_criteria
from .model import SeriesMatrix
from .params import ModelOrder, ParameterVector, RegimeParameters, unvec, unvech, vec, vech
from .stationarity import JsrCertificate

SCHEMA_VERSION = "1.0"
LAYOUT_NOTE = (
    "phi0[m] = intercept of regime m; ar[m][i] = vec(A_{m,i+1}) column-major; "
    "omega[m] = vech(Omega_m) column-major lower triangle incl. diagonal; "
    "alphas = transition weight parameters (sum to one)"
)


@contextmanager
def atomic_write(path, mode="w"):
    """Write to a temporary sibling file and rename it into place on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, newline="" if "b" not in mode else None) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def params_to_dict(params: ParameterVector) -> dict:
    o = params.order
    return {
        "order": {"d": o.d, "p": o.p, "M": o.M},
        "layout": LAYOUT_NOTE,
        "phi0": [r.phi0.tolist() for r in params.regimes],
        "ar": [[vec(a).tolist() for a in r.ar_mats] for r in params.regimes],
        "omega": [vech(r.omega).tolist() for r in params.regimes],
        "alphas": params.alphas.tolist(),
    }


def params_from_dict(obj: dict) -> ParameterVector:
    o = obj["order"]
    order = ModelOrder(int(o["d"]), int(o["p"]), int(o["M"]))
    d = order.d
    regimes = tuple(
        RegimeParameters(
            np.array(obj["phi0"][m], dtype=float),
            tuple(unvec(np.array(a, dtype=float), d) for a in obj["ar"][m]),
            unvech(np.array(obj["omega"][m], dtype=float), d),
        )
        for m in range(order.M)
    )
    alphas = np.array(obj["alphas"], dtype=float)
    identified = bool(order.M == 1 or np.all(np.diff(alphas) < 0))
    return ParameterVector(order, regimes, alphas, identified)


def jsr_to_dict(c: JsrCertificate | None):
    if c is None:
        return None
    return {
        "lower": c.lower,
        "upper": c.upper,
        "tolerance": c.tolerance_requested,
        "iterations": c.iterations,
        "products_explored": c.products_explored,
        "converged": c.converged,
    }


def model_to_json(params: ParameterVector, fit: FittedModel | None = None,
                  names=None, extra: dict | None = None) -> str:
    doc = {"schema_version": SCHEMA_VERSION, "tool_version": __version__}
    doc.update(params_to_dict(params))
    if names is not None:
        doc["variables"] = list(names)
    if fit is not None:
        doc["fit"] = {
            "loglik": fit.loglik,
            "T": fit.data_T,
            "seed": fit.seed,
            "jsr": jsr_to_dict(fit.jsr),
            "criteria": information_criteria(fit),
            "rounds": [{"round": int(i), "loglik": float(ll), "status": s}
                       for i, ll, s in fit.rounds_summary],
        }
    if extra:
        doc.update(extra)
    # json emits the shortest repr of each float, which round-trips bit-exactly
    return json.dumps(doc, indent=2, allow_nan=True) + "\n"


def write_model(path, params: ParameterVector, fit: FittedModel | None = None, names=None,
                extra: dict | None = None) -> None:
    text = model_to_json(params, fit, names, extra)
    with atomic_write(path) as fh:
        fh.write(text)


def read_model(path) -> tuple[ParameterVector, dict]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if "order" not in doc:
        raise InvalidData(f"{path}: not a model file")
    return params_from_dict(doc), doc


def read_data_csv(path) -> SeriesMatrix:
    """Read a CSV with a header row and an optional leading ``date`` column."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidData(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    has_date = bool(header) and header[0].lower() == "date"
    names = header[1:] if has_date else header
    if not names:
        raise InvalidData(f"{path}: no data columns")
    values, dates = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise InvalidData(f"{path}: line {lineno}: expected {len(header)} cells, got {len(row)}")
        cells = row[1:] if has_date else row
        if has_date:
            dates.append(row[0].strip())
        parsed = []
        for col, cell in enumerate(cells, start=2 if has_date else 1):
            cell = cell.strip()
            if cell == "":
                raise InvalidData(f"{path}: line {lineno}, column {col}: missing value")
            try:
                v = float(cell)
            except ValueError:
                raise InvalidData(f"{path}: line {lineno}, column {col}: not a number: {cell!r}")
            if not np.isfinite(v):
                raise InvalidData(f"{path}: line {lineno}, column {col}: non-finite value")
            parsed.append(v)
        values.append(parsed)
    if not values:
        raise InvalidData(f"{path}: no data rows")
    return SeriesMatrix(np.array(values), tuple(dates) if has_date else None, tuple(names))


def write_data_csv(path, values: np.ndarray, names=None, dates=None) -> None:
    values = np.asarray(values, dtype=float)
    names = list(names) if names is not None else [f"y{i + 1}" for i in range(values.shape[1])]
    with atomic_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow((["date"] if dates is not None else []) + names)
        for k, row in enumerate(values):
            w.writerow(([dates[k]] if dates is not None else []) + [repr(float(v)) for v in row])


def write_rows_csv(path, header, rows) -> None:
    with atomic_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(r)
