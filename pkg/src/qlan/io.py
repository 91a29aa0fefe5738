"""CSV and JSON artifacts.

Numbers are written with 17 significant digits and a '.' decimal point,
independent of locale. Files are written to a temporary sibling and renamed
into place, so readers never observe a partial artifact.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "format_number",
    "atomic_write",
    "write_csv",
    "read_csv",
    "write_json",
    "matrix_to_pairs",
    "pairs_to_matrix",
    "matrices_to_rows",
    "experiment_rows",
    "experiment_from_rows",
]


def format_number(x) -> str:
    """Locale-free text for a CSV cell; floats keep 17 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if x == 0:
            return "0"
        return f"{x:.17g}"
    return str(x)


def atomic_write(path, data: str) -> Path:
    """Write ``data`` to ``path`` via a temporary file and ``os.replace``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_number(x) for x in row])
    return atomic_write(path, buf.getvalue())


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def _json_default(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return [x.real, x.imag]
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _finite(x):
    """Replace non-finite floats by strings; JSON has no NaN or infinity."""
    if isinstance(x, dict):
        return {k: _finite(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite(v) for v in x]
    if isinstance(x, (float, np.floating)) and not math.isfinite(x):
        return format_number(x)
    return x


def write_json(path, obj) -> Path:
    text = json.dumps(_finite(obj), indent=2, sort_keys=True, default=_json_default, allow_nan=False)
    return atomic_write(path, text + "\n")


def matrix_to_pairs(M) -> list[list[list[float]]]:
    """Row-major ``[[ [re, im], ... ], ...]``."""
    M = np.asarray(M, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def pairs_to_matrix(data) -> np.ndarray:
    """Inverse of :func:`matrix_to_pairs`; real scalars are accepted as entries."""
    rows = []
    for row in data:
        out = []
        for z in row:
            if isinstance(z, (list, tuple)):
                if len(z) != 2:
                    raise ValueError(f"complex entry must be [re, im], got {z!r}")
                out.append(complex(float(z[0]), float(z[1])))
            else:
                out.append(complex(float(z)))
        rows.append(out)
    M = np.array(rows, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    return M


def matrices_to_rows(mats: Sequence[np.ndarray]) -> tuple[list[str], list[list]]:
    """One row per matrix: index, then row-major entries with re/im interleaved."""
    if not mats:
        return ["k"], []
    d = np.asarray(mats[0]).shape[0]
    header = ["k"] + [f"{part}_{i}_{j}" for i in range(d) for j in range(d) for part in ("re", "im")]
    rows = []
    for k, M in enumerate(mats):
        flat = np.asarray(M, dtype=complex).ravel()
        rows.append([k] + [v for z in flat for v in (z.real, z.imag)])
    return header, rows


def experiment_rows(E) -> tuple[list[str], list[list]]:
    """Rows are parameter labels, columns are outcomes."""
    header = ["theta"] + [f"w{j}" for j in range(E.n_outcomes)]
    return header, E.to_csv_rows()


def experiment_from_rows(header: Sequence[str], rows: Sequence[Sequence[str]]):
    from qlan.classical import ClassicalExperiment

    if not header or header[0] != "theta":
        raise ValueError("experiment CSV must start with a 'theta' column")
    params = tuple(r[0] for r in rows)
    probs = [[float(v) for v in r[1:]] for r in rows]
    return ClassicalExperiment(probs, params=params)
