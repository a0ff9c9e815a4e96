"""CSV readers and writers for panels and results.

Floats are written as the shortest decimal that round-trips; missing values
are empty fields.  Every writer has a reader that restores the same values.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .panel_sim import PANEL_COLUMNS

RESULT_COLUMNS = ("term", "estimate", "se", "t", "p", "n_obs", "n_clusters")
GROUP_TIME_COLUMNS = ("g", "t", "event_time", "att", "se", "weight")
TRUTH_COLUMNS = ("scope", "event_time", "att")
SWEEP_COLUMNS = ("wealth", "wage", "delta_work_prob", "feasible")
VALUE_COLUMNS = ("t", "z", "a_idx", "xi_idx", "xj_idx", "value", "p_ww", "p_wc", "p_cw", "p_cc")
HEALTH_COLUMNS = ("age", "uncond_rate", "cond_rate")

# Panel columns that may be missing and so need nullable integers.
_NULLABLE_INT = ("event_wave", "event_time", "true_y0")
_FLOAT_PANEL = ("weekly_hours", "log_assets")


class SchemaError(ValueError):
    """Input file does not match the expected layout."""


def format_value(x) -> str:
    if x is None or x is pd.NA:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return ""
        return repr(x)
    return str(x)


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
            w.writerow([format_value(v) for v in row])
    return path


def write_frame(path, frame: pd.DataFrame, columns: Sequence[str]) -> Path:
    cols = [frame[c].to_numpy(dtype=object) for c in columns]
    return write_rows(path, columns, zip(*cols))


def _read(path, header: Sequence[str], dtypes: dict) -> pd.DataFrame:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        first = next(csv.reader(fh), None)
    if first is None or tuple(first) != tuple(header):
        raise SchemaError(f"{path}: header {first} does not match {list(header)}")
    return pd.read_csv(path, dtype=dtypes, float_precision="round_trip", keep_default_na=False,
                       na_values=[""])


def write_panel(path, panel: pd.DataFrame) -> Path:
    cols = [c for c in PANEL_COLUMNS if c in panel.columns]
    return write_frame(path, panel, cols)


def read_panel(path) -> pd.DataFrame:
    """Read a panel file, checking every cell against the schema.

    ``true_y0`` is optional.  Errors name the offending row and column.
    """
    path = Path(path)
    raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    required = [c for c in PANEL_COLUMNS if c != "true_y0"]
    missing = [c for c in required if c not in raw.columns]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}")
    extra = [c for c in raw.columns if c not in PANEL_COLUMNS]
    if extra:
        raise SchemaError(f"{path}: unexpected columns {extra}")
    out = {}
    for col in [c for c in PANEL_COLUMNS if c in raw.columns]:
        s = raw[col]
        empty = s == ""
        nums = pd.to_numeric(s.where(~empty), errors="coerce")
        bad = nums.isna() & ~empty
        if col not in _NULLABLE_INT and col not in _FLOAT_PANEL:
            bad |= empty
        if col not in _FLOAT_PANEL:
            bad |= nums.notna() & (nums != np.round(nums))
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise SchemaError(
                f"{path}: row {row + 2}, column {col!r}: invalid value {s.iloc[row]!r}"
            )
        if col in _FLOAT_PANEL:
            out[col] = np.array([float(v) if v else np.nan for v in s], dtype=float)
        elif col in _NULLABLE_INT:
            out[col] = nums.astype("Int64")
        else:
            out[col] = nums.astype(np.int64)
    return pd.DataFrame(out)


def write_truth(path, truth) -> Path:
    return write_rows(path, TRUTH_COLUMNS, truth.rows())


def read_truth(path) -> pd.DataFrame:
    return _read(path, TRUTH_COLUMNS, {"scope": str, "event_time": "Int64", "att": float})


def write_results(path, rows) -> Path:
    return write_rows(path, RESULT_COLUMNS, rows)


def read_results(path) -> pd.DataFrame:
    return _read(
        path,
        RESULT_COLUMNS,
        {"term": str, "estimate": float, "se": float, "t": float, "p": float,
         "n_obs": "Int64", "n_clusters": "Int64"},
    )


def write_group_time(path, result) -> Path:
    return write_rows(path, GROUP_TIME_COLUMNS, result.rows())


def read_group_time(path) -> pd.DataFrame:
    return _read(
        path,
        GROUP_TIME_COLUMNS,
        {"g": "Int64", "t": "Int64", "event_time": "Int64", "att": float, "se": float,
         "weight": float},
    )


def write_sweep(path, result) -> Path:
    return write_rows(path, SWEEP_COLUMNS, result.rows())


def read_sweep(path) -> pd.DataFrame:
    df = _read(path, SWEEP_COLUMNS, {"wealth": float, "wage": float, "delta_work_prob": float,
                                     "feasible": "Int64"})
    df["feasible"] = df["feasible"].astype(bool)
    return df


def write_value_function(path, vf) -> Path:
    return write_rows(path, VALUE_COLUMNS, vf.rows())


def read_value_function(path) -> pd.DataFrame:
    dt = {c: "Int64" for c in VALUE_COLUMNS[:5]}
    dt.update({c: float for c in VALUE_COLUMNS[5:]})
    return _read(path, VALUE_COLUMNS, dt)


def write_health(path, stats) -> Path:
    return write_rows(path, HEALTH_COLUMNS, stats.rows())


def read_health(path) -> pd.DataFrame:
    return _read(path, HEALTH_COLUMNS, {"age": "Int64", "uncond_rate": float, "cond_rate": float})
