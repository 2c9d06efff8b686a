"""Layout annotation documents, sequence manifests and dataset statistics."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from .errors import MissingSeries, SchemaError, ValidationError
from .layout import (
    SEGMENT_LABELS,
    Junction,
    LayoutAnnotation,
    LineSegment,
    check_kind,
    check_label,
)

SCHEMA_VERSION = 1
MODES = ("handheld", "head-mounted")

DEFAULT_EDGES = {
    "lux": (0, 50, 100, 400, 800),
    "angular_speed": (0, 2, 4, 6, 8, 10),
    "linear_speed": (0, 0.1, 0.2, 0.4, 0.8),
    "junction_count": (0, 1, 2, 3, 4, 5),
}
DEFAULT_CEILING = {"angular_speed": 12.8}


# ------------------------------------------------------------ annotations


def _require(doc: Mapping, key: str, kind, where: str = ""):
    name = f"{where}{key}"
    if key not in doc:
        raise SchemaError(name, "missing")
    value = doc[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(name, "expected a number")
        value = float(value)
        if not math.isfinite(value):
            raise SchemaError(name, "must be finite")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaError(name, "expected an integer")
        return value
    if not isinstance(value, kind):
        raise SchemaError(name, f"expected {kind.__name__}")
    return value


def _pair(doc, key, where):
    value = _require(doc, key, list, where)
    if len(value) != 2:
        raise SchemaError(f"{where}{key}", "expected [x, y]")
    return tuple(_require({"v": v}, "v", float, f"{where}{key}.") for v in value)


def parse_annotation(doc) -> LayoutAnnotation:
    """Validate an annotation document (JSON text or an already-loaded dict)."""
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise SchemaError("<document>", str(exc)) from None
    if not isinstance(doc, dict):
        raise SchemaError("<document>", "expected an object")
    version = _require(doc, "version", int)
    if version != SCHEMA_VERSION:
        raise SchemaError("version", f"unsupported version {version}")
    width = _require(doc, "width", int)
    height = _require(doc, "height", int)
    if width <= 0 or height <= 0:
        raise SchemaError("width", "image dims must be positive")
    room_type = doc.get("room_type")
    if room_type is not None:
        room_type = _require(doc, "room_type", int)
        if not 1 <= room_type <= 8:
            raise SchemaError("room_type", "must be 1-8")

    junctions = []
    for i, j in enumerate(_require(doc, "junctions", list)):
        where = f"junctions[{i}]."
        if not isinstance(j, dict):
            raise SchemaError(where[:-1], "expected an object")
        x = _require(j, "x", float, where)
        y = _require(j, "y", float, where)
        kind = check_kind(_require(j, "kind", str, where))
        junctions.append(Junction((x, y), kind, j.get("label")))

    segments = []
    for i, s in enumerate(_require(doc, "segments", list)):
        where = f"segments[{i}]."
        if not isinstance(s, dict):
            raise SchemaError(where[:-1], "expected an object")
        label = check_label(_require(s, "label", str, where))
        segments.append(LineSegment(_pair(s, "p1", where), _pair(s, "p2", where), label))

    return LayoutAnnotation(
        width, height, tuple(junctions), tuple(segments), room_type=room_type,
        sequence_id=str(doc.get("sequence_id", "")), timestamp=int(doc.get("timestamp", 0)),
        version=version,
    )


def annotation_to_dict(a: LayoutAnnotation) -> dict:
    doc = {
        "version": a.version,
        "width": a.width,
        "height": a.height,
        "room_type": a.room_type,
        "sequence_id": a.sequence_id,
        "timestamp": a.timestamp,
        "junctions": [],
        "segments": [{"p1": list(s.p1), "p2": list(s.p2), "label": s.label} for s in a.segments],
    }
    for j in a.junctions:
        jd = {"x": j.point[0], "y": j.point[1], "kind": j.kind}
        if j.label is not None:
            jd["label"] = j.label
        doc["junctions"].append(jd)
    return doc


def write_annotation(a: LayoutAnnotation) -> str:
    return json.dumps(annotation_to_dict(a), indent=1)


def load_annotation(path) -> LayoutAnnotation:
    with open(path, encoding="utf-8") as fh:
        return parse_annotation(fh.read())


def save_annotation(a: LayoutAnnotation, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(write_annotation(a))


# -------------------------------------------------------------- manifests


@dataclass(frozen=True)
class SequenceManifest:
    sequence_id: str
    mode: str
    events: Optional[str] = None
    annotations: tuple = ()
    imu: Optional[str] = None
    lux: Optional[str] = None
    scene: str = ""

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        object.__setattr__(self, "annotations", tuple(self.annotations))

    def paths(self) -> List[str]:
        return [p for p in (self.events, self.imu, self.lux, *self.annotations) if p]


def manifest_to_dict(seqs: Sequence[SequenceManifest]) -> dict:
    return {
        "version": SCHEMA_VERSION,
        "sequences": [
            {"sequence_id": s.sequence_id, "mode": s.mode, "events": s.events,
             "annotations": list(s.annotations), "imu": s.imu, "lux": s.lux, "scene": s.scene}
            for s in seqs
        ],
    }


def load_manifest(path) -> List[SequenceManifest]:
    """Read a manifest; relative paths resolve against its directory and must exist."""
    root = os.path.dirname(os.path.abspath(path))
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("<manifest>", str(exc)) from None

    def resolve(p):
        return None if p is None else os.path.join(root, p)

    seqs = []
    for i, entry in enumerate(_require(doc, "sequences", list)):
        try:
            seq = SequenceManifest(
                sequence_id=str(entry["sequence_id"]),
                mode=entry.get("mode", "handheld"),
                events=resolve(entry.get("events")),
                annotations=tuple(resolve(p) for p in entry.get("annotations", [])),
                imu=resolve(entry.get("imu")),
                lux=resolve(entry.get("lux")),
                scene=entry.get("scene", ""),
            )
        except KeyError as exc:
            raise SchemaError(f"sequences[{i}].{exc.args[0]}", "missing") from None
        for p in seq.paths():
            if not os.path.exists(p):
                raise ValidationError(f"manifest {path}: {seq.sequence_id} references missing file {p}")
        seqs.append(seq)
    return seqs


def save_manifest(seqs: Sequence[SequenceManifest], path) -> None:
    root = os.path.dirname(os.path.abspath(path))

    def rel(p):
        return None if p is None else os.path.relpath(p, root)

    rel_seqs = [
        SequenceManifest(s.sequence_id, s.mode, events=rel(s.events),
                         annotations=tuple(rel(p) for p in s.annotations),
                         imu=rel(s.imu), lux=rel(s.lux), scene=s.scene)
        for s in seqs
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest_to_dict(rel_seqs), fh, indent=2)


# ------------------------------------------------------------- statistics


class StatsRow(NamedTuple):
    name: str
    count: int
    percent: float


@dataclass
class StatsTable:
    rows: List[StatsRow]
    axis: str = ""
    assignments: Dict[str, str] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(r.count for r in self.rows)

    def counts(self) -> Dict[str, int]:
        return {r.name: r.count for r in self.rows}

    def percents(self) -> Dict[str, float]:
        return {r.name: r.percent for r in self.rows}

    def to_csv(self) -> str:
        lines = ["name,count,percent"]
        lines += [f"{r.name},{r.count},{r.percent:.2f}" for r in self.rows]
        lines.append(f"Total,{self.total},{100.0 if self.total else 0.0:.2f}")
        return "\n".join(lines) + "\n"


def _table(names: Sequence[str], counts: Sequence[int], axis: str = "") -> StatsTable:
    total = sum(counts)
    rows = [StatsRow(n, int(c), 100.0 * c / total if total else 0.0) for n, c in zip(names, counts)]
    return StatsTable(rows, axis)


def label_stats(annotations: Sequence[LayoutAnnotation]) -> StatsTable:
    counts = dict.fromkeys(SEGMENT_LABELS, 0)
    for a in annotations:
        for s in a.segments:
            counts[s.label] += 1
    return _table(SEGMENT_LABELS, [counts[k] for k in SEGMENT_LABELS], "label")


class SequenceData(NamedTuple):
    """Loaded per-sequence series for binning; unused fields may be None."""

    sequence_id: str
    imu: object = None  # ImuSeries
    lux: object = None  # LuxSeries
    annotations: Optional[Sequence[LayoutAnnotation]] = None


def linear_speed(imu) -> np.ndarray:
    """Planar speed (m/s) by integrating horizontal acceleration from rest."""
    t = np.asarray(imu.t, dtype=np.float64) * 1e-6
    acc = np.asarray(imu.accel, dtype=np.float64)[:, :2]
    if len(t) < 2:
        return np.zeros(len(t))
    steps = 0.5 * (acc[1:] + acc[:-1]) * np.diff(t)[:, None]
    vel = np.vstack([np.zeros((1, 2)), np.cumsum(steps, axis=0)])
    return np.linalg.norm(vel, axis=1)


def sequence_scalar(seq: SequenceData, axis: str) -> float:
    """Mean of the requested series over the whole sequence."""
    if axis == "lux":
        if seq.lux is None or len(seq.lux.lux) == 0:
            raise MissingSeries(seq.sequence_id, "lux series")
        return float(np.mean(seq.lux.lux))
    if axis == "angular_speed":
        if seq.imu is None or len(seq.imu.t) == 0:
            raise MissingSeries(seq.sequence_id, "IMU series")
        return float(np.mean(np.linalg.norm(np.asarray(seq.imu.gyro), axis=1)))
    if axis == "linear_speed":
        if seq.imu is None or len(seq.imu.t) == 0:
            raise MissingSeries(seq.sequence_id, "IMU series")
        return float(np.mean(linear_speed(seq.imu)))
    if axis == "junction_count":
        if not seq.annotations:
            raise MissingSeries(seq.sequence_id, "annotations")
        return float(np.mean([len(a.junctions) for a in seq.annotations]))
    raise ValidationError(f"unknown axis {axis!r}")


def _fmt(v) -> str:
    return f"{v:g}"


def bin_labels(edges: Sequence[float], axis: str = "", ceiling: Optional[float] = None) -> List[str]:
    labels = []
    for i, lo in enumerate(edges):
        last = i == len(edges) - 1
        if axis == "junction_count":
            labels.append(f"{_fmt(lo)}+" if last else _fmt(lo))
        elif last:
            labels.append(f"[{_fmt(lo)}, {_fmt(ceiling)}]" if ceiling is not None else f"[{_fmt(lo)}, inf)")
        else:
            labels.append(f"[{_fmt(lo)}, {_fmt(edges[i + 1])})")
    return labels


def bin_sequences(sequences: Sequence[SequenceData], axis: str, edges: Optional[Sequence[float]] = None,
                  ceiling: Optional[float] = None) -> StatsTable:
    """Histogram of per-sequence means over half-open bins; the last bin is open-ended."""
    if edges is None:
        edges = DEFAULT_EDGES.get(axis)
        if edges is None:
            raise ValidationError(f"unknown axis {axis!r}")
        if ceiling is None:
            ceiling = DEFAULT_CEILING.get(axis)
    edges = [float(e) for e in edges]
    if not edges or any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValidationError("bin edges must be strictly increasing")
    names = bin_labels(edges, axis, ceiling)
    counts = [0] * len(edges)
    assignments = {}
    for seq in sequences:
        v = sequence_scalar(seq, axis)
        if v < edges[0]:
            raise ValidationError(f"{seq.sequence_id}: {axis}={v} below the first bin edge {edges[0]}")
        k = int(np.searchsorted(edges, v, side="right")) - 1
        counts[k] += 1
        assignments[seq.sequence_id] = names[k]
    table = _table(names, counts, axis)
    table.assignments = assignments
    return table


def load_sequence_data(seq: SequenceManifest) -> SequenceData:
    from .simulator import read_imu_csv, read_lux_csv

    return SequenceData(
        seq.sequence_id,
        imu=read_imu_csv(seq.imu) if seq.imu else None,
        lux=read_lux_csv(seq.lux) if seq.lux else None,
        annotations=[load_annotation(p) for p in seq.annotations] or None,
    )
