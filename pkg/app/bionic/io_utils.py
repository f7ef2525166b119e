from __future__ import annotations

"""
File codecs used by the dataset loader, the CLI and the simulator.

This module contains no modelling logic. It focuses on:
- Reading per-view CSV matrices (header of feature names, empty cell = missing)
- Reading/writing the BMV1 binary matrix format
- Reading label CSVs (`id,label`)
- Writing result tables with a provenance comment line
- Hashing config documents for provenance

Functions
---------
read_view_csv(path, id_column) -> (ids | None, feature_names, values)
    `values` is float64 with NaN at empty cells.

read_matrix_bin(path) -> values
write_matrix_bin(path, values) -> None
    BMV1: magic b"BMV1", u64 rows, u64 cols, row-major little-endian f64 payload.
    NaN encodes a missing entry.

read_labels_csv(path) -> (ids, labels)

write_table_csv(path, frame, provenance=None) -> str
    Write a DataFrame as CSV; `provenance` becomes a leading `# bionic ...` line.

config_sha256(doc) -> str
    SHA-256 of the canonical JSON (sorted keys, compact separators).
"""

import hashlib
import json
import struct
from pathlib import Path
from typing import Any, List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd

from .errors import DataValidationError

BMV_MAGIC = b"BMV1"
_BMV_HEADER = struct.Struct("<4sQQ")


# ---------------------------
# CSV matrices
# ---------------------------


def _cell_to_float(cell: str) -> float:
    try:
        return float(cell)
    except ValueError:
        return np.nan


def _parse_cells(cells: np.ndarray, empty: np.ndarray) -> np.ndarray:
    """
    Text cells -> float64 with correct rounding (repr-written values come back
    bit-identical). Empty and unparsable cells give NaN.
    """
    filled = np.where(empty, "nan", cells)
    try:
        return filled.astype(np.float64)
    except ValueError:
        return np.vectorize(_cell_to_float, otypes=[np.float64])(filled)


def read_view_csv(path: Path | str, id_column: Optional[str] = "id") -> Tuple[Optional[List[str]], List[str], np.ndarray]:
    """
    Read one view CSV.

    Every cell is read as text first so that an empty cell (missing) can be told
    apart from a malformed one; anything that does not parse to a finite float
    raises DataValidationError with the row/column of the first offender.

    Returns:
        (ids or None when the id column is absent, feature names, values N x D)
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=False, comment=None)
    except FileNotFoundError as e:
        raise DataValidationError(f"view file not found: {path}") from e
    except pd.errors.EmptyDataError as e:
        raise DataValidationError(f"view file is empty: {path}") from e

    ids: Optional[List[str]] = None
    if id_column and id_column in frame.columns:
        ids = [s.strip() for s in frame[id_column].tolist()]
        frame = frame.drop(columns=[id_column])

    text = frame.apply(lambda col: col.str.strip())
    empty = (text == "").to_numpy()
    numeric = _parse_cells(text.to_numpy(dtype=object), empty)
    bad = ~empty & ~np.isfinite(numeric)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise DataValidationError(
            f"non-numeric cell in {path.name}: row {int(r)} column {frame.columns[c]!r} = {text.iat[r, c]!r}"
        )
    numeric[empty] = np.nan
    return ids, [str(c) for c in frame.columns], numeric


def write_view_csv(path: Path | str, values: np.ndarray, feature_names: List[str], ids: Optional[List[str]] = None, id_column: str = "id") -> str:
    """Write a view matrix; NaN cells become empty strings. Returns the path."""
    frame = pd.DataFrame(np.asarray(values, dtype=np.float64), columns=feature_names)
    if ids is not None:
        frame.insert(0, id_column, ids)
    frame.to_csv(path, index=False, na_rep="")
    return str(path)


# ---------------------------
# BMV1 binary matrices
# ---------------------------


def read_matrix_bin(path: Path | str) -> np.ndarray:
    """Read a BMV1 matrix (NaN = missing)."""
    raw = Path(path).read_bytes()
    if len(raw) < _BMV_HEADER.size:
        raise DataValidationError(f"{path}: truncated BMV1 header")
    magic, rows, cols = _BMV_HEADER.unpack_from(raw, 0)
    if magic != BMV_MAGIC:
        raise DataValidationError(f"{path}: bad magic {magic!r}, expected {BMV_MAGIC!r}")
    payload = raw[_BMV_HEADER.size:]
    if len(payload) != rows * cols * 8:
        raise DataValidationError(f"{path}: payload has {len(payload)} bytes, expected {rows * cols * 8}")
    values = np.frombuffer(payload, dtype="<f8").reshape(rows, cols).astype(np.float64)
    if np.isinf(values).any():
        raise DataValidationError(f"{path}: infinite value in matrix")
    return values


def write_matrix_bin(path: Path | str, values: np.ndarray) -> str:
    values = np.ascontiguousarray(values, dtype="<f8")
    if values.ndim != 2:
        raise DataValidationError(f"BMV1 stores 2-D matrices, got shape {values.shape}")
    rows, cols = values.shape
    with open(path, "wb") as fh:
        fh.write(_BMV_HEADER.pack(BMV_MAGIC, rows, cols))
        fh.write(values.tobytes(order="C"))
    return str(path)


# ---------------------------
# Labels
# ---------------------------


def read_labels_csv(path: Path | str) -> Tuple[List[str], np.ndarray]:
    """
    Read `id,label` rows. Empty label cells are treated as absent rows.

    Returns:
        (ids, integer labels) for the rows that carry a label.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError as e:
        raise DataValidationError(f"label file not found: {path}") from e
    missing_cols = {"id", "label"} - set(frame.columns)
    if missing_cols:
        raise DataValidationError(f"label file {path.name} lacks columns {sorted(missing_cols)}")
    frame = frame[frame["label"].str.strip() != ""]
    ids = [s.strip() for s in frame["id"].tolist()]
    labels = pd.to_numeric(frame["label"].str.strip(), errors="coerce").to_numpy()
    if np.isnan(labels).any() or np.any(labels != np.round(labels)):
        raise DataValidationError(f"label file {path.name}: labels must be integer class indices")
    return ids, labels.astype(np.int64)


def write_labels_csv(path: Path | str, ids: List[str], labels: np.ndarray) -> str:
    pd.DataFrame({"id": ids, "label": np.asarray(labels, dtype=np.int64)}).to_csv(path, index=False)
    return str(path)


# ---------------------------
# Result tables & provenance
# ---------------------------


def provenance_line(meta: Mapping[str, Any]) -> str:
    """`# bionic key=value ...` with keys in sorted order."""
    return "# bionic " + " ".join(f"{k}={meta[k]}" for k in sorted(meta))


def write_table_csv(path: Path | str, frame: pd.DataFrame, provenance: Optional[Mapping[str, Any]] = None) -> str:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if provenance:
            fh.write(provenance_line(provenance) + "\n")
        frame.to_csv(fh, index=False, na_rep="")
    return str(path)


def read_table_csv(path: Path | str) -> pd.DataFrame:
    """Read a table written by write_table_csv (provenance line skipped)."""
    return pd.read_csv(path, comment="#")


def config_sha256(doc: Mapping[str, Any]) -> str:
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False, default=str)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


__all__ = [
    "BMV_MAGIC",
    "read_view_csv",
    "write_view_csv",
    "read_matrix_bin",
    "write_matrix_bin",
    "read_labels_csv",
    "write_labels_csv",
    "provenance_line",
    "write_table_csv",
    "read_table_csv",
    "config_sha256",
]
