"""Layout geometry shared by the simulator, annotation I/O and metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

from .errors import BadJunctionKind, UnknownLabel, ValidationError

SEGMENT_LABELS = ("ceiling-wall", "wall-wall", "floor-wall", "window-wall", "door-wall")
JUNCTION_KINDS = ("intersection", "isolated")

Point = Tuple[float, float]


def check_label(label: str) -> str:
    if label not in SEGMENT_LABELS:
        raise UnknownLabel(f"unknown segment label {label!r}")
    return label


def check_kind(kind: str) -> str:
    if kind not in JUNCTION_KINDS:
        raise BadJunctionKind(f"unknown junction kind {kind!r}")
    return kind


def _point(p) -> Point:
    x, y = (float(v) for v in p)
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValidationError(f"non-finite coordinate {p!r}")
    return (x, y)


@dataclass(frozen=True)
class LineSegment:
    p1: Point
    p2: Point
    label: str = "wall-wall"

    def __post_init__(self):
        object.__setattr__(self, "p1", _point(self.p1))
        object.__setattr__(self, "p2", _point(self.p2))
        check_label(self.label)

    @property
    def length(self) -> float:
        return math.dist(self.p1, self.p2)


@dataclass(frozen=True)
class Junction:
    point: Point
    kind: str = "intersection"
    label: Optional[str] = None  # matching tag for jAP; None = single class

    def __post_init__(self):
        object.__setattr__(self, "point", _point(self.point))
        check_kind(self.kind)


@dataclass(frozen=True)
class LayoutAnnotation:
    width: int
    height: int
    junctions: Tuple[Junction, ...] = ()
    segments: Tuple[LineSegment, ...] = ()
    room_type: Optional[int] = None
    sequence_id: str = ""
    timestamp: int = 0
    version: int = 1
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if int(self.width) <= 0 or int(self.height) <= 0:
            raise ValidationError(f"bad image dims {self.width}x{self.height}")
        if self.room_type is not None and not 1 <= int(self.room_type) <= 8:
            raise ValidationError(f"room_type must be 1-8, got {self.room_type}")
        object.__setattr__(self, "junctions", tuple(self.junctions))
        object.__setattr__(self, "segments", tuple(self.segments))


def point_segment_distance(p, a, b) -> float:
    """Euclidean distance from point ``p`` to the closed segment ``ab``."""
    px, py = p
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    den = dx * dx + dy * dy
    if den == 0.0:
        return math.hypot(px - ax, py - ay)
    s = min(1.0, max(0.0, ((px - ax) * dx + (py - ay) * dy) / den))
    return math.hypot(px - (ax + s * dx), py - (ay + s * dy))
