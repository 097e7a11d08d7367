"""CSV panel ingestion and machine-readable run reports.

Ingestion reads a delimited text file with a header row, resolves one
covariate column and two or more response columns, optionally filters by
an ISO-8601 date column, and hands back a centered panel together with
the bookkeeping a report needs. Reports serialize to a stable JSON layout
whose numeric fields survive a write/read cycle exactly.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from datetime import date

import numpy as np

from .core import PanelData, center_columns
from .errors import (
    ConfigError,
    MissingColumn,
    NonPositiveUForLog,
    ParseError,
    TooFewRows,
)

__all__ = [
    "IngestSpec",
    "IngestResult",
    "MethodResult",
    "RunReport",
    "ingest_csv",
    "read_report",
    "write_report",
]

REPORT_SCHEMA = "ffselect/run-report/1"

# cell values treated as absent, compared case-insensitively
_MISSING_TOKENS = frozenset({"", "na", "nan", "null"})


@dataclass(frozen=True)
class IngestSpec:
    """Where a panel comes from and how its columns map to the model.

    ``response_columns=None`` selects every column that is neither the
    covariate nor the date column. ``date_start``/``date_end`` are ISO
    dates and both endpoints are kept when filtering.
    """

    path: str
    u_column: str
    response_columns: tuple | None = None
    log_u: bool = False
    drop_incomplete: bool = True
    date_column: str | None = None
    date_start: str | None = None
    date_end: str | None = None

    def __post_init__(self) -> None:
        if not self.u_column:
            raise ConfigError("u_column must be a non-empty column name")
        if self.response_columns is not None:
            cols = tuple(self.response_columns)
            if not cols:
                raise ConfigError("response_columns cannot be an empty list")
            if self.u_column in cols:
                raise ConfigError(
                    f"u_column {self.u_column!r} cannot also be a response column"
                )
            if self.date_column is not None and self.date_column in cols:
                raise ConfigError(
                    f"date_column {self.date_column!r} cannot also be a response column"
                )
            if len(set(cols)) != len(cols):
                raise ConfigError("response_columns contains duplicates")
            object.__setattr__(self, "response_columns", cols)
        if (self.date_start or self.date_end) and self.date_column is None:
            raise ConfigError("date_start/date_end require a date_column")
        for label, value in (("date_start", self.date_start), ("date_end", self.date_end)):
            if value is not None:
                try:
                    date.fromisoformat(value)
                except ValueError as exc:
                    raise ConfigError(f"{label} {value!r} is not an ISO date") from exc


@dataclass(frozen=True)
class IngestResult:
    """A centered panel plus everything the source file said about it."""

    panel: PanelData
    source: str
    u_column: str
    response_columns: tuple
    log_u: bool
    date_column: str | None
    date_range: tuple | None
    rows_read: int
    rows_dropped_incomplete: int
    rows_dropped_period: int


def _parse_cell(text: str, line_no: int, column: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(
            f"cannot parse {text!r} as a number at line {line_no}, column {column!r}"
        ) from None


def ingest_csv(spec: IngestSpec) -> IngestResult:
    """Read, filter, transform and center a CSV panel.

    Rows are processed in three stages: date filtering (rows sorted by
    date first, endpoints inclusive), incomplete-row removal, then the
    optional log transform of the covariate and column centering. Line
    numbers in error messages count from the header as line 1.
    """
    import csv

    try:
        with open(spec.path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ParseError(f"{spec.path}: file has no header row") from None
            raw_rows = [(line_no, row) for line_no, row in enumerate(reader, start=2)]
    except OSError as exc:
        raise ParseError(f"cannot read {spec.path}: {exc}") from None

    header = [name.strip() for name in header]
    seen: dict[str, int] = {}
    for idx, name in enumerate(header):
        if name in seen:
            raise ParseError(
                f"duplicate column name {name!r} in header (positions {seen[name] + 1} and {idx + 1})"
            )
        seen[name] = idx

    if spec.u_column not in seen:
        raise MissingColumn(f"u_column {spec.u_column!r} not found; header has {header}")
    if spec.date_column is not None and spec.date_column not in seen:
        raise MissingColumn(f"date_column {spec.date_column!r} not found; header has {header}")
    if spec.response_columns is None:
        responses = tuple(
            name for name in header if name not in (spec.u_column, spec.date_column)
        )
    else:
        for name in spec.response_columns:
            if name not in seen:
                raise MissingColumn(f"response column {name!r} not found; header has {header}")
        responses = spec.response_columns
    if len(responses) < 2:
        raise ConfigError(f"need at least 2 response columns, got {len(responses)}")

    width = len(header)
    for line_no, row in raw_rows:
        if len(row) != width:
            raise ParseError(
                f"line {line_no} has {len(row)} fields, header has {width}"
            )

    rows_read = len(raw_rows)
    dropped_period = 0
    date_range = None
    if spec.date_column is not None:
        d_idx = seen[spec.date_column]
        dated = []
        for line_no, row in raw_rows:
            text = row[d_idx].strip()
            try:
                when = date.fromisoformat(text)
            except ValueError:
                raise ParseError(
                    f"cannot parse {text!r} as an ISO date at line {line_no}, "
                    f"column {spec.date_column!r}"
                ) from None
            dated.append((when, line_no, row))
        # key includes the row content so the result is invariant under any
        # reordering of the input file, even with duplicate dates
        dated.sort(key=lambda item: (item[0], item[2]))
        start = date.fromisoformat(spec.date_start) if spec.date_start else None
        end = date.fromisoformat(spec.date_end) if spec.date_end else None
        kept = [
            (when, line_no, row)
            for when, line_no, row in dated
            if (start is None or when >= start) and (end is None or when <= end)
        ]
        dropped_period = rows_read - len(kept)
        if kept:
            date_range = (kept[0][0].isoformat(), kept[-1][0].isoformat())
        raw_rows = [(line_no, row) for _, line_no, row in kept]

    u_idx = seen[spec.u_column]
    r_idx = [seen[name] for name in responses]
    u_vals: list[float] = []
    y_rows: list[list[float]] = []
    dropped_incomplete = 0
    for line_no, row in raw_rows:
        cells = [row[u_idx]] + [row[i] for i in r_idx]
        names = [spec.u_column] + list(responses)
        missing = next(
            (name for name, cell in zip(names, cells)
             if cell.strip().lower() in _MISSING_TOKENS),
            None,
        )
        if missing is not None:
            if spec.drop_incomplete:
                dropped_incomplete += 1
                continue
            raise ParseError(
                f"missing value at line {line_no}, column {missing!r} "
                "(pass drop_incomplete to skip such rows)"
            )
        u_vals.append(_parse_cell(cells[0], line_no, spec.u_column))
        y_rows.append(
            [_parse_cell(c, line_no, name) for c, name in zip(cells[1:], responses)]
        )

    if len(u_vals) < 3:
        raise TooFewRows(
            f"{spec.path}: {len(u_vals)} usable rows after filtering, need at least 3"
        )

    u = np.asarray(u_vals, dtype=np.float64)
    y = np.asarray(y_rows, dtype=np.float64)
    if spec.log_u:
        bad = np.flatnonzero(u <= 0.0)
        if bad.size:
            raise NonPositiveUForLog(
                f"covariate must be positive for the log transform, got {u[bad[0]]!r} "
                f"in row {int(bad[0]) + 1} of the filtered data"
            )
        u = np.log(u)

    panel = center_columns(y, u)
    return IngestResult(
        panel=panel,
        source=spec.path,
        u_column=spec.u_column,
        response_columns=responses,
        log_u=spec.log_u,
        date_column=spec.date_column,
        date_range=date_range,
        rows_read=rows_read,
        rows_dropped_incomplete=dropped_incomplete,
        rows_dropped_period=dropped_period,
    )


@dataclass(frozen=True)
class MethodResult:
    """One selector's outcome in report form."""

    method: str
    p_hat: int
    criterion_values: tuple
    p_min: int
    p_max: int
    bandwidth: float
    kernel: str
    seed: int
    n: int
    m: int
    warnings: tuple = ()
    wall_ms: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "criterion_values", tuple(float(v) for v in self.criterion_values)
        )
        object.__setattr__(self, "warnings", tuple(str(w) for w in self.warnings))

    @property
    def criterion_at_p_hat(self) -> float:
        return self.criterion_values[self.p_hat - self.p_min]


@dataclass(frozen=True)
class RunReport:
    """Everything one invocation did, in a JSON-stable layout.

    ``filter_then_center`` records the preprocessing order: period
    filtering happens on raw rows and centering afterwards, so column
    means are those of the analyzed window only.
    """

    source: str
    n: int
    m: int
    u_column: str
    response_columns: tuple
    log_u: bool
    date_column: str | None
    date_range: tuple | None
    rows_dropped_incomplete: int
    rows_dropped_period: int
    bandwidth: float
    kernel: str
    seed: int
    results: tuple = ()
    filter_then_center: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "response_columns", tuple(self.response_columns))
        if self.date_range is not None:
            object.__setattr__(self, "date_range", tuple(self.date_range))
        object.__setattr__(self, "results", tuple(self.results))
        for entry in self.results:
            if not isinstance(entry, MethodResult):
                raise ConfigError(
                    f"results must hold MethodResult entries, got {type(entry).__name__}"
                )
        if not (math.isfinite(self.bandwidth) and self.bandwidth > 0.0):
            raise ConfigError(f"bandwidth must be positive and finite, got {self.bandwidth!r}")


def _report_dict(report: RunReport) -> dict:
    return {
        "schema": REPORT_SCHEMA,
        "source": report.source,
        "n": report.n,
        "m": report.m,
        "u_column": report.u_column,
        "response_columns": list(report.response_columns),
        "log_u": report.log_u,
        "date_column": report.date_column,
        "date_range": list(report.date_range) if report.date_range else None,
        "rows_dropped_incomplete": report.rows_dropped_incomplete,
        "rows_dropped_period": report.rows_dropped_period,
        "filter_then_center": report.filter_then_center,
        "bandwidth": report.bandwidth,
        "kernel": report.kernel,
        "seed": report.seed,
        "results": [
            {
                "method": r.method,
                "p_hat": r.p_hat,
                "criterion_values": list(r.criterion_values),
                "p_min": r.p_min,
                "p_max": r.p_max,
                "bandwidth": r.bandwidth,
                "kernel": r.kernel,
                "seed": r.seed,
                "n": r.n,
                "m": r.m,
                "warnings": list(r.warnings),
                "wall_ms": r.wall_ms,
            }
            for r in report.results
        ],
    }


def _atomic_write_text(path: str, text: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    try:
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(report: RunReport, path: str) -> None:
    """Serialize the report as JSON, atomically.

    Key order is fixed and floats use their shortest exact decimal form,
    so identical reports produce identical bytes.
    """
    _atomic_write_text(path, json.dumps(_report_dict(report), indent=2) + "\n")


def read_report(path: str) -> RunReport:
    """Parse a report written by :func:`write_report`; numerics are exact."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from None
    if raw.get("schema") != REPORT_SCHEMA:
        raise ParseError(
            f"{path}: unknown report schema {raw.get('schema')!r}, expected {REPORT_SCHEMA!r}"
        )
    try:
        results = tuple(
            MethodResult(
                method=e["method"],
                p_hat=e["p_hat"],
                criterion_values=tuple(e["criterion_values"]),
                p_min=e["p_min"],
                p_max=e["p_max"],
                bandwidth=e["bandwidth"],
                kernel=e["kernel"],
                seed=e["seed"],
                n=e["n"],
                m=e["m"],
                warnings=tuple(e["warnings"]),
                wall_ms=e["wall_ms"],
            )
            for e in raw["results"]
        )
        return RunReport(
            source=raw["source"],
            n=raw["n"],
            m=raw["m"],
            u_column=raw["u_column"],
            response_columns=tuple(raw["response_columns"]),
            log_u=raw["log_u"],
            date_column=raw["date_column"],
            date_range=tuple(raw["date_range"]) if raw["date_range"] else None,
            rows_dropped_incomplete=raw["rows_dropped_incomplete"],
            rows_dropped_period=raw["rows_dropped_period"],
            bandwidth=raw["bandwidth"],
            kernel=raw["kernel"],
            seed=raw["seed"],
            results=results,
            filter_then_center=raw["filter_then_center"],
        )
    except KeyError as exc:
        raise ParseError(f"{path}: report is missing field {exc}") from None
