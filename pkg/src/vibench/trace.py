"""Run traces and their CSV serialization.

Schema (version 1): a ``#``-prefixed metadata preamble with fixed key
order, the fixed header row

    iter,component_evals,matvec_ops,gap_avg,gap_last,residual,elapsed_ms

then one row per trace point.  Floats are printed with 10 significant
digits; ``elapsed_ms`` is an integer and is the only column excluded from
the byte-determinism guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

TRACE_FORMAT = "vibench-trace v1"
CSV_HEADER = "iter,component_evals,matvec_ops,gap_avg,gap_last,residual,elapsed_ms"


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    component_evals: int
    matvec_ops: float
    gap_avg: float
    gap_last: float
    residual: float
    elapsed_ms: int


@dataclass
class RunTrace:
    """Time series plus metadata for a single solver run.

    ``x_avg`` (the ergodic average, the run's answer) and ``x_last`` are
    populated by in-process runs and are not serialized to CSV.
    """

    metadata: dict
    rows: list[TraceRow] = field(default_factory=list)
    x_avg: Optional[np.ndarray] = None
    x_last: Optional[np.ndarray] = None

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(f"# {TRACE_FORMAT}\n")
            for key, value in self.metadata.items():
                fh.write(f"# {key}={_format_meta(value)}\n")
            fh.write(CSV_HEADER + "\n")
            for r in self.rows:
                fh.write(
                    f"{r.iteration},{r.component_evals},{r.matvec_ops:.10g},"
                    f"{r.gap_avg:.10g},{r.gap_last:.10g},{r.residual:.10g},"
                    f"{r.elapsed_ms}\n"
                )

    @classmethod
    def read_csv(cls, path) -> "RunTrace":
        metadata: dict = {}
        rows: list[TraceRow] = []
        header_seen = False
        with open(path, "r", encoding="ascii") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    body = line[1:].strip()
                    if "=" in body:
                        key, _, value = body.partition("=")
                        metadata[key.strip()] = value.strip()
                    continue
                if not header_seen:
                    if line != CSV_HEADER:
                        raise ValueError(
                            f"{path}: line {lineno}: unexpected header {line!r}"
                        )
                    header_seen = True
                    continue
                parts = line.split(",")
                if len(parts) != 7:
                    raise ValueError(f"{path}: line {lineno}: expected 7 columns")
                rows.append(TraceRow(
                    iteration=int(parts[0]),
                    component_evals=int(parts[1]),
                    matvec_ops=float(parts[2]),
                    gap_avg=float(parts[3]),
                    gap_last=float(parts[4]),
                    residual=float(parts[5]),
                    elapsed_ms=int(parts[6]),
                ))
        if not header_seen:
            raise ValueError(f"{path}: no trace header found (empty trace file?)")
        return cls(metadata=metadata, rows=rows)


def _format_meta(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    if isinstance(value, (list, tuple)):
        return ";".join(str(v) for v in value)
    return str(value)
