"""Event data model, EVLK binary / CSV stream I/O, validation and windowing.

Timestamps are integer microseconds. Streams keep four parallel column
arrays (``t`` int64, ``x``/``y`` uint16, ``p`` int8) that are made
read-only on construction, so slices can share memory safely.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from typing import Iterable, Iterator, List, NamedTuple, Tuple

import numpy as np

from .errors import (
    BadPolarity,
    MalformedHeader,
    MalformedRecord,
    NonMonotonicTimestamp,
    RecordOutOfBounds,
    ValidationError,
)

MAGIC = b"EVLK"
VERSION = 1
HEADER = struct.Struct("<4sHHHQ")
HEADER_SIZE = HEADER.size  # 18 bytes
RECORD_DTYPE = np.dtype(
    [("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "i1"), ("reserved", "V3")]
)
RECORD_SIZE = RECORD_DTYPE.itemsize  # 16 bytes
CSV_HEADER = "t_us,x,y,p"
DEFAULT_WIDTH, DEFAULT_HEIGHT = 1280, 720
TIME_UNIT = "us"

_CHUNK = 1 << 22


class Event(NamedTuple):
    t: int
    x: int
    y: int
    p: int


@dataclass(frozen=True)
class TimeWindow:
    """Half-open interval ``[t0, t0 + dt)`` in microseconds."""

    t0: int
    dt: int

    def __post_init__(self):
        if int(self.dt) <= 0:
            raise ValidationError(f"window dt must be > 0, got {self.dt}")
        object.__setattr__(self, "t0", int(self.t0))
        object.__setattr__(self, "dt", int(self.dt))

    @property
    def end(self) -> int:
        return self.t0 + self.dt

    def contains(self, t) -> bool:
        return self.t0 <= t < self.end


@dataclass(frozen=True)
class ValidationReport:
    violations: List[Tuple[int, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _column(values, dtype, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValidationError(f"column {name} must be 1-D")
    if arr.dtype == dtype:
        return arr
    if arr.size and np.issubdtype(dtype, np.integer):
        info = np.iinfo(dtype)
        lo, hi = arr.min(), arr.max()
        if lo < info.min or hi > info.max:
            bad = np.flatnonzero((arr < info.min) | (arr > info.max))[0]
            if name == "p":
                raise BadPolarity(bad, f"p={arr[bad]}")
            if name == "t":
                raise MalformedRecord(bad, f"timestamp {arr[bad]} not representable")
            raise RecordOutOfBounds(bad, f"{name}={arr[bad]}")
        if not np.issubdtype(arr.dtype, np.integer) and np.any(arr != np.round(arr)):
            bad = np.flatnonzero(arr != np.round(arr))[0]
            raise MalformedRecord(bad, f"non-integer {name}")
    return arr.astype(dtype)


def _first_violations(t, x, y, p, width, height) -> List[Tuple[int, str]]:
    first = {}
    n = len(t)
    for start in range(0, n, _CHUNK):
        stop = min(n, start + _CHUNK)
        checks = {
            "RecordOutOfBounds": (x[start:stop] >= width) | (y[start:stop] >= height),
            "BadPolarity": (p[start:stop] != 1) & (p[start:stop] != -1),
            "NegativeTimestamp": t[start:stop] < 0,
        }
        lo = max(start - 1, 0)
        checks["NonMonotonicTimestamp"] = np.diff(t[lo:stop]) < 0
        offset = {"NonMonotonicTimestamp": lo + 1}
        for code, mask in checks.items():
            if code in first:
                continue
            hits = np.flatnonzero(mask)
            if hits.size:
                first[code] = int(hits[0]) + offset.get(code, start)
        if len(first) == 4:
            break
    return sorted(((i, code) for code, i in first.items()))


_ERRORS = {
    "RecordOutOfBounds": RecordOutOfBounds,
    "BadPolarity": BadPolarity,
    "NonMonotonicTimestamp": NonMonotonicTimestamp,
    "NegativeTimestamp": MalformedRecord,
}


@dataclass(frozen=True, eq=False)
class EventStream:
    """Time-ordered events on a ``width`` x ``height`` sensor.

    Construction validates the stream and raises the error for the first
    offending record. ``check=False`` skips that (used to build deliberately
    broken streams for :func:`validate_stream`).
    """

    width: int
    height: int
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        w, h = int(self.width), int(self.height)
        if not (0 < w <= 0xFFFF and 0 < h <= 0xFFFF):
            raise ValidationError(f"bad sensor geometry {w}x{h}")
        object.__setattr__(self, "width", w)
        object.__setattr__(self, "height", h)
        cols = {
            "t": _column(self.t, np.int64, "t"),
            "x": _column(self.x, np.uint16, "x"),
            "y": _column(self.y, np.uint16, "y"),
            "p": _column(self.p, np.int8, "p"),
        }
        n = len(cols["t"])
        if any(len(c) != n for c in cols.values()):
            raise ValidationError("event columns differ in length")
        for name, col in cols.items():
            if col.flags.writeable:
                col = col.view()
                col.flags.writeable = False
            object.__setattr__(self, name, col)
        if self.check:
            bad = _first_violations(self.t, self.x, self.y, self.p, w, h)
            if bad:
                index, code = bad[0]
                raise _ERRORS[code](index)

    @classmethod
    def empty(cls, width: int = DEFAULT_WIDTH, height: int = DEFAULT_HEIGHT) -> "EventStream":
        z = np.zeros(0, np.int64)
        return cls(width, height, z, z, z, z)

    @classmethod
    def from_events(cls, events: Iterable, width: int = DEFAULT_WIDTH,
                    height: int = DEFAULT_HEIGHT, check: bool = True) -> "EventStream":
        rows = [tuple(e) for e in events]
        if not rows:
            return cls.empty(width, height)
        t, x, y, p = (np.array(c, dtype=np.int64) for c in zip(*rows))
        return cls(width, height, t, x, y, p, check=check)

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> Event:
        return Event(int(self.t[i]), int(self.x[i]), int(self.y[i]), int(self.p[i]))

    def __iter__(self) -> Iterator[Event]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and all(np.array_equal(getattr(self, c), getattr(other, c)) for c in "txyp")
        )

    __hash__ = None

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width

    def span(self) -> TimeWindow:
        """Smallest window holding every event (1 us if empty)."""
        if not len(self):
            return TimeWindow(0, 1)
        return TimeWindow(int(self.t[0]), int(self.t[-1]) - int(self.t[0]) + 1)

    def take(self, index) -> "EventStream":
        return EventStream(self.width, self.height, self.t[index], self.x[index],
                           self.y[index], self.p[index], check=False)


def validate_stream(s: EventStream) -> ValidationReport:
    """Report each violated invariant once, at its first offending index."""
    return ValidationReport(_first_violations(s.t, s.x, s.y, s.p, s.width, s.height))


def window_bounds(s: EventStream, w: TimeWindow) -> Tuple[int, int]:
    lo = int(np.searchsorted(s.t, w.t0, side="left"))
    hi = int(np.searchsorted(s.t, w.end, side="left"))
    return lo, hi


def slice_window(s: EventStream, w: TimeWindow) -> EventStream:
    """Events with ``t0 <= t < t0 + dt``; shares memory with ``s``."""
    lo, hi = window_bounds(s, w)
    return s.take(slice(lo, hi))


def concat_streams(streams: List[EventStream]) -> EventStream:
    if not streams:
        raise ValidationError("nothing to concatenate")
    w, h = streams[0].width, streams[0].height
    if any((s.width, s.height) != (w, h) for s in streams):
        raise ValidationError("geometry mismatch")
    cols = [np.concatenate([getattr(s, c) for s in streams]) for c in "txyp"]
    return EventStream(w, h, *cols)


# ---------------------------------------------------------------- binary I/O


def _parse_binary(data: bytes) -> EventStream:
    if len(data) < HEADER_SIZE:
        raise MalformedHeader(f"need {HEADER_SIZE} header bytes, got {len(data)}")
    magic, version, width, height, count = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise MalformedHeader(f"bad magic {magic!r}")
    if version != VERSION:
        raise MalformedHeader(f"unsupported version {version}")
    if width == 0 or height == 0:
        raise MalformedHeader(f"bad geometry {width}x{height}")
    expected = HEADER_SIZE + count * RECORD_SIZE
    if len(data) != expected:
        raise MalformedHeader(f"count={count} implies {expected} bytes, got {len(data)}")
    rec = np.frombuffer(data, dtype=RECORD_DTYPE, count=count, offset=HEADER_SIZE)
    if count:
        reserved = np.frombuffer(rec["reserved"].tobytes(), np.uint8).reshape(-1, 3)
        nz = np.flatnonzero(reserved.any(axis=1))
        if nz.size:
            raise MalformedRecord(nz[0], "reserved bytes must be zero")
        big = np.flatnonzero(rec["t"] > np.iinfo(np.int64).max)
        if big.size:
            raise MalformedRecord(big[0], "timestamp exceeds int64 range")
    return EventStream(width, height, rec["t"].astype(np.int64), rec["x"].copy(),
                       rec["y"].copy(), rec["p"].copy())


def _write_binary(s: EventStream) -> bytes:
    rec = np.zeros(len(s), dtype=RECORD_DTYPE)
    rec["t"] = s.t
    rec["x"] = s.x
    rec["y"] = s.y
    rec["p"] = s.p
    return HEADER.pack(MAGIC, VERSION, s.width, s.height, len(s)) + rec.tobytes()


# ------------------------------------------------------------------- CSV I/O


def _parse_csv(data: bytes, width: int, height: int) -> EventStream:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedHeader("CSV must be UTF-8") from exc
    lines = text.split("\n")
    if lines[0].rstrip("\r") != CSV_HEADER:
        raise MalformedHeader(f"expected header {CSV_HEADER!r}, got {lines[0][:40]!r}")
    body = lines[1:]
    if body and body[-1] == "":
        body.pop()
    if not body:
        return EventStream.empty(width, height)
    try:
        arr = np.loadtxt(io.StringIO("\n".join(body)), delimiter=",", dtype=np.int64, ndmin=2)
        if arr.shape[1] != 4 or arr.shape[0] != len(body):
            raise ValueError
    except ValueError:
        for i, line in enumerate(body):
            parts = line.split(",")
            try:
                if len(parts) != 4:
                    raise ValueError
                [int(v) for v in parts]
            except ValueError:
                raise MalformedRecord(i, repr(line[:60])) from None
        raise MalformedRecord(0, "unparseable CSV body") from None
    t, x, y, p = arr.T
    for name, col in (("x", x), ("y", y)):
        neg = np.flatnonzero(col < 0)
        if neg.size:
            raise RecordOutOfBounds(neg[0], f"{name}={col[neg[0]]}")
    return EventStream(width, height, t, x, y, p)


def _write_csv(s: EventStream) -> bytes:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    if len(s):
        cols = np.column_stack([s.t, s.x.astype(np.int64), s.y.astype(np.int64), s.p.astype(np.int64)])
        np.savetxt(buf, cols, fmt="%d", delimiter=",", newline="\n")
    return buf.getvalue().encode("utf-8")


def parse_event_stream(data: bytes, format: str = "binary", width: int = DEFAULT_WIDTH,
                       height: int = DEFAULT_HEIGHT) -> EventStream:
    """Parse an EVLK binary or CSV payload.

    CSV carries no geometry, so ``width``/``height`` apply to CSV only.
    Unsorted input is rejected, never re-sorted.
    """
    if format == "binary":
        return _parse_binary(bytes(data))
    if format == "csv":
        return _parse_csv(bytes(data), width, height)
    raise ValidationError(f"unknown event format {format!r}")


def write_event_stream(s: EventStream, format: str = "binary") -> bytes:
    if format == "binary":
        return _write_binary(s)
    if format == "csv":
        return _write_csv(s)
    raise ValidationError(f"unknown event format {format!r}")


def guess_format(path) -> str:
    return "csv" if str(path).lower().endswith(".csv") else "binary"


def read_events(path, width: int = DEFAULT_WIDTH, height: int = DEFAULT_HEIGHT) -> EventStream:
    with open(path, "rb") as fh:
        return parse_event_stream(fh.read(), guess_format(path), width, height)


def save_events(s: EventStream, path) -> None:
    with open(path, "wb") as fh:
        fh.write(write_event_stream(s, guess_format(path)))
