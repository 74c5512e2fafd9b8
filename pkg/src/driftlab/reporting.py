"""Deterministic CSV/JSON writers for experiment artifacts.

All floats are serialized with 17 significant digits so values round-trip
exactly; rows are written in a fixed order and JSON keys are sorted, which
makes repeated runs with the same seed byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np


def fmt(value) -> str:
    """Round-trip-safe scalar formatting."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def jsonable(value):
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    return value


def write_csv(path, header, rows, meta=None):
    """CSV with optional constant metadata columns appended to every row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = meta or {}
    full_header = list(header) + list(meta.keys())
    lines = [",".join(full_header)]
    for row in rows:
        if isinstance(row, dict):
            cells = [fmt(row.get(h)) for h in header]
        else:
            cells = [fmt(v) for v in row]
        cells += [fmt(v) for v in meta.values()]
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(jsonable(payload), sort_keys=True, indent=2, separators=(",", ": "))
    path.write_text(text + "\n", encoding="utf-8")


def params_hash(payload) -> str:
    """Stable short hash of a parameter mapping."""
    blob = json.dumps(jsonable(payload), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def spectrum_rows(spectrum):
    rows = []
    for i, (lam, res) in enumerate(zip(spectrum.eigenvalues, spectrum.residual_norms)):
        row = {"index": i, "eigenvalue": float(lam), "residual": float(res)}
        if spectrum.discretization_estimate is not None:
            row["discretization_estimate"] = float(spectrum.discretization_estimate[i])
        rows.append(row)
    return rows


def write_spectrum_csv(path, spectrum, meta=None):
    rows = spectrum_rows(spectrum)
    header = ["index", "eigenvalue", "residual"]
    if spectrum.discretization_estimate is not None:
        header.append("discretization_estimate")
    write_csv(path, header, rows, meta)


def write_eigenfunctions_csv(path, spectrum, meta=None):
    """Grid-by-index matrix of eigenfunction samples."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    nodes = spectrum.problem.nodes
    V = spectrum.eigenfunctions
    header = ["coordinate"] + [f"f{i}" for i in range(V.shape[1])]
    lines = [",".join(header)]
    for r in range(V.shape[0]):
        lines.append(",".join([fmt(nodes[r])] + [fmt(v) for v in V[r]]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
