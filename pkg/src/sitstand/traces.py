"""CSV formats for labelled traces and supervisor logs.

Every file starts with a version line, then the column header:

    # sitstand-trace v1
    t,Fhx,Fhy,Fgx,Fgy,Mgz,hx,hy[,phase]

    # sitstand-log v1
    t,Fhx,Fhy,Fgx,Fgy,Mgz,hx,hy,<features>,nu1_raw,nu1_used,nu2,mode,cmd_x,cmd_y

Floats are written with ``repr`` so values round-trip exactly and two runs
with the same inputs produce the same bytes.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .preprocessing import TRACE_COLUMNS, PosturalFeatures, SensorFrame

TRACE_MAGIC = "# sitstand-trace v1"
LOG_MAGIC = "# sitstand-log v1"

# filtered features carry an _lp suffix so they do not shadow the raw channels
FEATURE_COLUMNS = ("Fhx_lp", "Fhy_lp", "Fgx_lp", "Fgy_lp", "dFhy", "dFgy", "cop_x", "cop_v", "cop_valid")
SUPERVISOR_COLUMNS = ("nu1_raw", "nu1_used", "nu2", "mode", "cmd_x", "cmd_y")
LOG_COLUMNS = TRACE_COLUMNS + FEATURE_COLUMNS + SUPERVISOR_COLUMNS
TIME_TOLERANCE = 1e-9


class TraceFormatError(ValueError):
    pass


def fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (float, int)):
        return repr(float(x))
    return str(x)


def _open_rows(path, magic: str) -> tuple[list[str], list[list[str]]]:
    try:
        text = Path(path).read_text()
    except (OSError, UnicodeDecodeError) as exc:
        raise TraceFormatError(f"{path}: cannot read ({exc.__class__.__name__})") from None
    lines = text.splitlines()
    if not lines or lines[0].strip() != magic:
        found = lines[0].strip() if lines else "empty file"
        raise TraceFormatError(f"{path}: expected {magic!r} on line 1, found {found!r}")
    rows = list(csv.reader(lines[1:]))
    if not rows:
        raise TraceFormatError(f"{path}: missing column header")
    return rows[0], [r for r in rows[1:] if r]


def _float(path, lineno, col, s) -> float:
    try:
        v = float(s)
    except ValueError:
        raise TraceFormatError(f"{path}:{lineno}: column {col}: not a number: {s!r}") from None
    if not math.isfinite(v):
        raise TraceFormatError(f"{path}:{lineno}: column {col}: non-finite value")
    return v


def _check_time(path, times: Sequence[float]):
    for i in range(1, len(times)):
        if not times[i] > times[i - 1] + TIME_TOLERANCE:
            raise TraceFormatError(f"{path}:{i + 3}: non-monotone t ({times[i - 1]!r} then {times[i]!r})")


def _frames_from_rows(path, header, rows) -> list[SensorFrame]:
    frames = []
    for n, row in enumerate(rows):
        if len(row) != len(header):
            raise TraceFormatError(f"{path}:{n + 3}: expected {len(header)} fields, got {len(row)}")
        vals = [_float(path, n + 3, c, row[i]) for i, c in enumerate(TRACE_COLUMNS)]
        frames.append(SensorFrame(*vals))
    _check_time(path, [f.t for f in frames])
    return frames


# ---- labelled traces -------------------------------------------------------

def write_trace(path, frames: Iterable[SensorFrame], labels: Iterable[str] | None = None) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    buf.write(TRACE_MAGIC + "\n")
    frames = list(frames)
    labels = list(labels) if labels is not None else None
    w.writerow(TRACE_COLUMNS + (("phase",) if labels is not None else ()))
    for i, f in enumerate(frames):
        row = [fmt(v) for v in f.as_row()]
        if labels is not None:
            row.append(labels[i])
        w.writerow(row)
    Path(path).write_text(buf.getvalue())


@dataclass
class TraceFile:
    frames: list[SensorFrame]
    labels: list[str] | None


def read_trace(path) -> TraceFile:
    """Read a trace CSV; a ``phase`` column is optional."""
    header, rows = _open_rows(path, TRACE_MAGIC)
    header = tuple(header)
    if header == TRACE_COLUMNS:
        labelled = False
    elif header == TRACE_COLUMNS + ("phase",):
        labelled = True
    else:
        raise TraceFormatError(f"{path}: unexpected columns {','.join(header)}")
    frames = _frames_from_rows(path, header, rows)
    labels = [r[-1] for r in rows] if labelled else None
    return TraceFile(frames, labels)


# ---- supervisor logs -------------------------------------------------------

def log_row(frame: SensorFrame, feats: PosturalFeatures, nu1_raw: float, nu1_used: float,
            nu2: float, mode: str, X) -> list[str]:
    vals = list(frame.as_row()) + [
        feats.Fhx, feats.Fhy, feats.Fgx, feats.Fgy, feats.dFhy, feats.dFgy,
        feats.cop_x, feats.cop_v, feats.cop_valid,
        nu1_raw, nu1_used, nu2, mode, float(X[0]), float(X[1]),
    ]
    return [fmt(v) for v in vals]


class LogWriter:
    """Streams Data-B rows to a file, header first."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = self.path.open("w", newline="")
        self._fh.write(LOG_MAGIC + "\n")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(LOG_COLUMNS)

    def write(self, row: Sequence[str]):
        self._w.writerow(row)

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_log(path) -> dict[str, list]:
    """Columns of a Data-B log; ``mode`` stays text, everything else is float."""
    header, rows = _open_rows(path, LOG_MAGIC)
    if tuple(header) != LOG_COLUMNS:
        raise TraceFormatError(f"{path}: unexpected columns {','.join(header)}")
    cols: dict[str, list] = {c: [] for c in LOG_COLUMNS}
    for n, row in enumerate(rows):
        if len(row) != len(LOG_COLUMNS):
            raise TraceFormatError(f"{path}:{n + 3}: expected {len(LOG_COLUMNS)} fields, got {len(row)}")
        for c, s in zip(LOG_COLUMNS, row):
            cols[c].append(s if c == "mode" else _float(path, n + 3, c, s))
    _check_time(path, cols["t"])
    return cols


def log_frames(cols: dict[str, list]) -> list[SensorFrame]:
    return [SensorFrame(*vals) for vals in zip(*(cols[c] for c in TRACE_COLUMNS))]


def read_frames(path) -> list[SensorFrame]:
    """Sensor frames from either a trace or a log file."""
    try:
        first = Path(path).open().readline().strip()
    except OSError as exc:
        raise TraceFormatError(f"{path}: cannot read ({exc.__class__.__name__})") from None
    if first == LOG_MAGIC:
        return log_frames(read_log(path))
    return read_trace(path).frames
