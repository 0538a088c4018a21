"""CSV writers for frontier, summary, sweep and profile tables.

All files use '.' decimals, LF line endings and a header row.
"""

from pathlib import Path

import pandas as pd


def write_frame(frame: pd.DataFrame, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        frame.to_csv(fh, index=False, lineterminator="\n")
    return path


def write_record(record: dict, path: str | Path) -> Path:
    """A single-row table, e.g. a search summary or an INFEASIBLE record."""
    return write_frame(pd.DataFrame([record], columns=list(record)), path)


def read_frame(path: str | Path) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"table not found: {path}")
    return pd.read_csv(path, float_precision="round_trip")
