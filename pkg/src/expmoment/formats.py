"""Text parsing and emission for the command line.

Numbers are written at 12 significant digits.  Inputs are either inline
comma lists or paths to small CSV files; ``-`` reads from stdin.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from typing import Iterable, Sequence, TextIO

import numpy as np

from .probability import FiniteDistribution
from .strategy_core import FiniteCostTable

SIG_DIGITS = 12
# 12-digit text cannot hit 1e-12 normalization for three or more symbols
PARSE_ATOL = 1e-9


def format_number(x) -> str:
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
        return f"{x:.{SIG_DIGITS}g}"
    return str(x)


def format_vector(values) -> str:
    return ";".join(format_number(float(v)) for v in np.asarray(values, dtype=float).ravel())


def _read_text(source: str) -> str:
    if source == "-":
        return sys.stdin.read()
    with open(source, encoding="utf-8") as fh:
        return fh.read()


def _floats(tokens: Iterable[str]) -> list[float]:
    out = []
    for tok in tokens:
        tok = tok.strip()
        if not tok:
            continue
        try:
            out.append(float(tok))
        except ValueError:
            raise ValueError(f"not a number: {tok!r}") from None
    return out


def _is_numeric_row(row: Sequence[str]) -> bool:
    try:
        _floats(row)
    except ValueError:
        return False
    return True


def parse_vector(text: str) -> np.ndarray:
    """Comma- or semicolon-separated numbers; whitespace separates too."""
    for sep in ";\n\t":
        text = text.replace(sep, ",")
    tokens = [t for chunk in text.split(",") for t in chunk.split()]
    vals = _floats(tokens)
    if not vals:
        raise ValueError("empty vector")
    return np.array(vals)


def parse_distribution(spec: str) -> FiniteDistribution:
    """Inline ``0.5,0.25,0.25``, a file of numbers, or ``-`` for stdin."""
    text = spec if _looks_inline(spec) else _read_text(spec)
    return FiniteDistribution(parse_vector(text), atol=PARSE_ATOL)


def _looks_inline(spec: str) -> bool:
    if spec == "-":
        return False
    return _is_numeric_row(spec.replace(";", ",").split(","))


def read_matrix(source: str) -> np.ndarray:
    """Numeric CSV; a leading non-numeric header row is skipped."""
    rows = [r for r in csv.reader(io.StringIO(_read_text(source))) if any(c.strip() for c in r)]
    if rows and not _is_numeric_row(rows[0]):
        rows = rows[1:]
    if not rows:
        raise ValueError(f"{source}: no numeric rows")
    data = [_floats(r) for r in rows]
    width = {len(r) for r in data}
    if len(width) != 1:
        raise ValueError(f"{source}: ragged rows")
    return np.array(data)


def parse_cost_table(source: str) -> FiniteCostTable:
    """Rows are symbols, columns are strategies."""
    return FiniteCostTable(read_matrix(source))


def parse_prior(source: str):
    """CSV with columns ``y, weight, phi``; weights are normalized."""
    from .estimators import FiniteSupportPrior

    mat = read_matrix(source)
    if mat.shape[1] != 3:
        raise ValueError(f"{source}: prior needs columns y, weight, phi")
    w = FiniteDistribution.from_weights(mat[:, 1])
    return FiniteSupportPrior(mat[:, 0], w, mat[:, 2])


def parse_range(spec: str) -> tuple[float, float, int]:
    """``lo:hi:steps``."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError(f"range must look like lo:hi:steps, got {spec!r}")
    lo, hi = float(parts[0]), float(parts[1])
    steps = int(parts[2])
    if steps < 2:
        raise ValueError("range needs at least 2 steps")
    return lo, hi, steps


def write_rows(
    columns: Sequence[str], rows: Iterable[Sequence], fmt: str, stream: TextIO
) -> None:
    """Emit a table as CSV (header + rows) or as a JSON list of flat objects."""
    cells = [[format_number(v) for v in row] for row in rows]
    if fmt == "csv":
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(cells)
    elif fmt == "json":
        objs = [dict(zip(columns, (_json_value(v) for v in row))) for row in cells]
        json.dump(objs, stream, indent=None)
        stream.write("\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def _json_value(text: str):
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        v = float(text)
    except ValueError:
        return text
    # json has no inf/nan; keep them as strings
    return v if math.isfinite(v) else text


def read_rows(stream: TextIO) -> tuple[list[str], list[list[str]]]:
    """Inverse of the CSV branch of :func:`write_rows`."""
    rows = list(csv.reader(stream))
    if not rows:
        return [], []
    return rows[0], rows[1:]
