"""Readers for the crowdcast CSV schemas.

Every crowdcast output starts with one ``#`` metadata comment line followed
by a header row.  The readers here check the header column by column so a
mismatched file is reported with the offending column name instead of
failing somewhere downstream.
"""

from __future__ import annotations

import csv
from pathlib import Path

CURVES = ("variant", "rule", "replication", "t", "n_tasks", "accuracy")
GROWTH_EVENTS = ("rule", "replication", "t")
INTEREVENT = ("rule", "dt")
TAILFITS = (
    "rule", "n_samples", "pl_alpha", "x_min", "geom_p",
    "exp_lambda", "lr_r", "lr_p",
)
RATES = ("axis_name", "axis_value", "rule", "mean_rate", "std_rate")
IMPROVEMENT = (
    "axis_name", "axis_value", "rule", "t",
    "mean_forecast_accuracy", "mean_baseline_accuracy", "mean_improvement",
)


class SchemaError(ValueError):
    pass


def read_table(path, expected_columns):
    """Rows of a crowdcast CSV as dicts, after validating the header."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"input file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise SchemaError(f"{path}: no header row")
    header = rows[0]
    for i, column in enumerate(expected_columns):
        if i >= len(header) or header[i] != column:
            found = header[i] if i < len(header) else "<missing>"
            raise SchemaError(
                f"{path}: expected column {i + 1} to be {column!r}, "
                f"found {found!r}"
            )
    if len(header) > len(expected_columns):
        raise SchemaError(
            f"{path}: unexpected extra column {header[len(expected_columns)]!r}"
        )
    return [dict(zip(header, row)) for row in rows[1:]]
