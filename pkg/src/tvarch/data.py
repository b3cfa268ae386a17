"""CSV ingestion for return series.

Reads one value column from a (possibly headered) CSV.  In ``prices`` mode
the column must be strictly positive and is transformed to log returns
x_t = log(P_t) - log(P_{t-1}); ``returns`` mode takes values as-is.  A scale
multiplier (e.g. 100 for percentage returns) is applied last.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InputError, NonPositivePriceError, ParseError
from .model import ReturnSeries

__all__ = ["IngestSpec", "load_series"]


@dataclass(frozen=True)
class IngestSpec:
    path: str
    column: str | int | None = None
    mode: str = "returns"
    scale: float = 1.0

    def __post_init__(self):
        if self.mode not in ("prices", "returns"):
            raise InputError(f"mode must be 'prices' or 'returns', got {self.mode!r}")
        if self.scale == 0.0:
            raise InputError("scale must be nonzero")


def _is_number(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def _resolve_column(spec: IngestSpec, first_row: list) -> tuple[int, bool]:
    """Column index and whether the first row is a header."""
    header = not all(_is_number(c) for c in first_row if c.strip() != "")
    column = spec.column
    if column is None:
        if len(first_row) == 1:
            return 0, header
        if header:
            # Prefer a column literally named like a value column.
            for name in ("x", "value", "close", "price", "return"):
                lowered = [c.strip().lower() for c in first_row]
                if name in lowered:
                    return lowered.index(name), True
        raise InputError("multi-column file needs an explicit column name or index")
    if isinstance(column, int) or (isinstance(column, str) and column.lstrip("-").isdigit()):
        idx = int(column)
        if not (0 <= idx < len(first_row)):
            raise InputError(f"column index {idx} out of range for {len(first_row)} columns")
        return idx, header
    if not header:
        raise InputError(f"file has no header row to resolve column name {column!r}")
    names = [c.strip() for c in first_row]
    if column not in names:
        raise InputError(f"column {column!r} not found among {names}")
    return names.index(column), True


def load_series(spec: IngestSpec) -> ReturnSeries:
    """Read the series described by ``spec`` into a :class:`ReturnSeries`."""
    try:
        with open(spec.path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read {spec.path}: {exc}") from exc
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError("file is empty")

    col, has_header = _resolve_column(spec, rows[0])
    values = []
    for line_no, row in enumerate(rows, start=1):
        if has_header and line_no == 1:
            continue
        if col >= len(row):
            raise ParseError(f"missing column {col}", line=line_no)
        cell = row[col].strip()
        if cell == "" or cell.lower() == "nan":
            raise ParseError("empty or NaN cell", line=line_no)
        try:
            values.append(float(cell))
        except ValueError:
            raise ParseError(f"cannot parse {cell!r} as a number", line=line_no) from None
    if not values:
        raise ParseError("no data rows")

    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        bad = int(np.argmax(~np.isfinite(arr)))
        raise ParseError("non-finite value", line=bad + 1 + int(has_header))

    if spec.mode == "prices":
        if np.any(arr <= 0.0):
            bad = int(np.argmax(arr <= 0.0))
            raise NonPositivePriceError(
                f"price {arr[bad]:g} at data row {bad + 1} is not strictly positive"
            )
        if arr.shape[0] < 2:
            raise InputError("prices mode needs at least two observations")
        arr = np.diff(np.log(arr))

    return ReturnSeries(arr * spec.scale)
