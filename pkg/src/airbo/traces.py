"""Per-iteration placement traces and their CSV serialisation.

The CSV schema is shared by the BO loop and the random baselines:
``iteration,x_km,y_km,value_raw,value_preprocessed,best_so_far,ess``.
The best-so-far *location* is not a column; loaders reconstruct it from
the running argmax of ``value_preprocessed``, which keeps every metric
tied to the same best-so-far indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .data import atomic_write_text
from .errors import InputError, ParseError

CSV_HEADER = "iteration,x_km,y_km,value_raw,value_preprocessed,best_so_far,ess"


@dataclass
class TraceRow:
    iteration: int
    x_km: float
    y_km: float
    value_raw: float
    value_pre: float
    best_so_far: float
    best_x_km: float
    best_y_km: float
    ess: float = math.nan  # nan where no weights were computed


@dataclass
class BoTrace:
    """History of one placement run on one snapshot."""

    snapshot_id: str
    rows: list[TraceRow] = field(default_factory=list)
    flagged_iterations: list[int] = field(default_factory=list)

    def append_observation(
        self, iteration: int, x_km: float, y_km: float,
        value_raw: float, value_pre: float, ess: float = math.nan,
    ) -> None:
        """Record one placement, maintaining the running best."""
        if not self.rows or value_pre > self.rows[-1].best_so_far:
            best, bx, by = value_pre, x_km, y_km
        else:
            last = self.rows[-1]
            best, bx, by = last.best_so_far, last.best_x_km, last.best_y_km
        self.rows.append(
            TraceRow(iteration, x_km, y_km, value_raw, value_pre, best, bx, by, ess)
        )

    @property
    def best_so_far(self) -> float:
        if not self.rows:
            return -math.inf
        return self.rows[-1].best_so_far

    def locations(self) -> list[tuple[float, float]]:
        return [(r.x_km, r.y_km) for r in self.rows]


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else repr(x)


def trace_to_csv(trace: BoTrace) -> str:
    lines = [CSV_HEADER]
    for r in trace.rows:
        lines.append(
            f"{r.iteration},{r.x_km!r},{r.y_km!r},{r.value_raw!r},"
            f"{r.value_pre!r},{r.best_so_far!r},{_fmt(r.ess)}"
        )
    return "\n".join(lines) + "\n"


def save_trace(trace: BoTrace, path) -> None:
    atomic_write_text(path, trace_to_csv(trace))


def load_trace(path, snapshot_id: str | None = None) -> BoTrace:
    """Read a trace CSV, rebuilding best-so-far locations from the rows."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"trace not found: {path}")
    trace = BoTrace(snapshot_id=snapshot_id or path.stem)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ParseError(f"{path}:1: unexpected trace header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 7:
                raise ParseError(f"{path}:{lineno}: expected 7 fields, got {len(parts)}")
            try:
                trace.append_observation(
                    iteration=int(parts[0]),
                    x_km=float(parts[1]),
                    y_km=float(parts[2]),
                    value_raw=float(parts[3]),
                    value_pre=float(parts[4]),
                    ess=float(parts[6]) if parts[6] else math.nan,
                )
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            if not math.isclose(trace.rows[-1].best_so_far, float(parts[5]), rel_tol=1e-12):
                raise ParseError(
                    f"{path}:{lineno}: best_so_far column disagrees with running maximum"
                )
    return trace
