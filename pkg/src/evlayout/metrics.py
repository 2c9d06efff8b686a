"""Structural (sAP) and junction (jAP) average precision.

Detections are ranked by confidence (ties by input order) and each one is
matched to the nearest still-unmatched ground truth of the same label; it is
a true positive when that distance is within the threshold, and a matched
ground truth is never reused. AP is the all-points sum
``sum_i (R_i - R_{i-1}) * P_i`` without precision interpolation.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import BadDims, SchemaError, ValidationError
from .layout import SEGMENT_LABELS, Junction, LineSegment, check_kind, check_label

SAP_BETAS = (5, 10, 15)
JAP_THRESHOLDS = (0.5, 1.0, 2.0)
EVAL_DIMS = (64, 64)


class Scored(NamedTuple):
    item: object  # LineSegment or Junction
    score: float


@dataclass
class DetectionSet:
    detections: List[Scored] = field(default_factory=list)
    ground_truth: list = field(default_factory=list)

    def __post_init__(self):
        self.detections = [Scored(*d) for d in self.detections]
        for d in self.detections:
            if not math.isfinite(d.score):
                raise ValidationError("detection confidences must be finite")

    def only_label(self, label) -> "DetectionSet":
        return DetectionSet([d for d in self.detections if d.item.label == label],
                            [g for g in self.ground_truth if g.label == label])


class ApResult(NamedTuple):
    ap: float
    precision: np.ndarray
    recall: np.ndarray
    tp: np.ndarray  # per ranked detection
    order: np.ndarray  # detection indices in rank order


# ---------------------------------------------------------------- geometry


def _scale(point, sx, sy):
    return (point[0] * sx, point[1] * sy)


def rescale_to_eval(geom, native_dims, eval_dims=EVAL_DIMS):
    """Scale coordinates by ``eval/native`` per axis; dims are ``(width, height)``."""
    (nw, nh), (ew, eh) = native_dims, eval_dims
    if min(nw, nh, ew, eh) <= 0:
        raise BadDims(f"dims must be positive: native={native_dims}, eval={eval_dims}")
    sx, sy = ew / nw, eh / nh
    if isinstance(geom, LineSegment):
        return LineSegment(_scale(geom.p1, sx, sy), _scale(geom.p2, sx, sy), geom.label)
    if isinstance(geom, Junction):
        return Junction(_scale(geom.point, sx, sy), geom.kind, geom.label)
    if isinstance(geom, Scored):
        return Scored(rescale_to_eval(geom.item, native_dims, eval_dims), geom.score)
    if isinstance(geom, (list, tuple)) and (not geom or not isinstance(geom[0], (int, float))):
        return type(geom)(rescale_to_eval(g, native_dims, eval_dims) for g in geom)
    arr = np.asarray(geom, dtype=np.float64)
    return arr * np.array([sx, sy])


def segment_match_cost(d: LineSegment, g: LineSegment) -> float:
    """Summed squared endpoint distance, minimised over endpoint order."""
    (a1, a2), (b1, b2) = (d.p1, d.p2), (g.p1, g.p2)

    def sq(p, q):
        return (p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2

    return min(sq(a1, b1) + sq(a2, b2), sq(a1, b2) + sq(a2, b1))


def junction_distance(d: Junction, g: Junction) -> float:
    return math.hypot(d.point[0] - g.point[0], d.point[1] - g.point[1])


def _cost_matrix(ds: DetectionSet, cost) -> np.ndarray:
    D = np.full((len(ds.detections), len(ds.ground_truth)), np.inf)
    for i, det in enumerate(ds.detections):
        for j, gt in enumerate(ds.ground_truth):
            if det.item.label == gt.label:
                D[i, j] = cost(det.item, gt)
    return D


def _segment_costs(ds: DetectionSet) -> np.ndarray:
    if not ds.detections or not ds.ground_truth:
        return np.full((len(ds.detections), len(ds.ground_truth)), np.inf)
    dp = np.array([[d.item.p1, d.item.p2] for d in ds.detections])
    gp = np.array([[g.p1, g.p2] for g in ds.ground_truth])

    def sq(a, b):
        return ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)

    direct = sq(dp[:, 0], gp[:, 0]) + sq(dp[:, 1], gp[:, 1])
    swapped = sq(dp[:, 0], gp[:, 1]) + sq(dp[:, 1], gp[:, 0])
    D = np.minimum(direct, swapped)
    dl = np.array([d.item.label for d in ds.detections], dtype=object)
    gl = np.array([g.label for g in ds.ground_truth], dtype=object)
    D[dl[:, None] != gl[None, :]] = np.inf
    return D


# ---------------------------------------------------------------- matching


def rank_order(scores: Sequence[float]) -> np.ndarray:
    """Descending confidence, ties kept in input order."""
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")


def greedy_match(costs: np.ndarray, scores: Sequence[float], threshold: float) -> Tuple[np.ndarray, np.ndarray]:
    """Return ``(order, tp)`` with ``tp`` aligned to ``order``."""
    order = rank_order(scores)
    n_gt = costs.shape[1]
    taken = np.zeros(n_gt, dtype=bool)
    tp = np.zeros(len(order), dtype=bool)
    for r, i in enumerate(order):
        if n_gt == 0:
            break
        c = np.where(taken, np.inf, costs[i])
        j = int(np.argmin(c))
        if c[j] <= threshold:
            taken[j] = True
            tp[r] = True
    return order, tp


def average_precision(tp: np.ndarray, n_gt: int) -> Tuple[float, np.ndarray, np.ndarray]:
    tp = np.asarray(tp, dtype=bool)
    if n_gt == 0 or tp.size == 0:
        return 0.0, np.zeros(tp.size), np.zeros(tp.size)
    ctp = np.cumsum(tp)
    precision = ctp / np.arange(1, tp.size + 1)
    recall = ctp / n_gt
    # fsum: exactly rounded, so the value never depends on summation order
    ap = math.fsum(np.diff(recall, prepend=0.0) * precision)
    return ap, precision, recall


def _evaluate(ds: DetectionSet, costs: np.ndarray, threshold: float) -> ApResult:
    scores = [d.score for d in ds.detections]
    order, tp = greedy_match(costs, scores, threshold)
    ap, precision, recall = average_precision(tp, len(ds.ground_truth))
    return ApResult(ap, precision, recall, tp, order)


def sap_curve(ds: DetectionSet, beta: float) -> ApResult:
    return _evaluate(ds, _segment_costs(ds), beta)


def jap_curve(ds: DetectionSet, threshold: float) -> ApResult:
    return _evaluate(ds, _cost_matrix(ds, junction_distance), threshold)


def compute_sap(ds: DetectionSet, beta: float) -> float:
    return sap_curve(ds, beta).ap


def compute_jap(ds: DetectionSet, threshold: float) -> float:
    return jap_curve(ds, threshold).ap


# ------------------------------------------------------------- aggregation


@dataclass
class ApReport:
    sap: Dict[str, Dict[float, float]]
    jap: Dict[str, Dict[float, float]]
    msap: Dict[float, float]
    mjap: Dict[float, float]
    sap_m_per_label: Dict[str, float]
    jap_m_per_label: Dict[str, float]
    sap_m: float
    jap_m: float
    excluded_labels: List[str] = field(default_factory=list)
    pr_curves: Dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        def keyed(d):
            return {str(k): v for k, v in d.items()}

        return {
            "sap": {lab: keyed(v) for lab, v in self.sap.items()},
            "jap": {str(lab): keyed(v) for lab, v in self.jap.items()},
            "msap": keyed(self.msap),
            "mjap": keyed(self.mjap),
            "sap_m_per_label": self.sap_m_per_label,
            "jap_m_per_label": {str(k): v for k, v in self.jap_m_per_label.items()},
            "sap_m": self.sap_m,
            "jap_m": self.jap_m,
            "excluded_labels": self.excluded_labels,
            "pr_curves": self.pr_curves,
        }

    def table_row(self, percent: bool = True) -> List[float]:
        """Values in the column order sAP5, sAP10, sAP15, sAPm, jAP0.5, jAP1.0, jAP2.0, jAPm."""
        k = 100.0 if percent else 1.0
        row = [self.msap.get(b, math.nan) for b in SAP_BETAS] + [self.sap_m]
        row += [self.mjap.get(t, math.nan) for t in JAP_THRESHOLDS] + [self.jap_m]
        return [v * k for v in row]

    def to_csv(self, method: str = "evlayout") -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TABLE_COLUMNS)
        w.writerow([method] + [f"{v:.1f}" for v in self.table_row()])
        return buf.getvalue()


TABLE_COLUMNS = ["Methods", "sAP5", "sAP10", "sAP15", "sAPm", "jAP0.5", "jAP1.0", "jAP2.0", "jAPm"]


def _mean(values) -> float:
    values = list(values)
    return float(sum(values) / len(values)) if values else math.nan


def aggregate(sap: Mapping, jap: Optional[Mapping] = None,
              expected_labels: Optional[Iterable[str]] = SEGMENT_LABELS) -> ApReport:
    """Means over labels (msAP per threshold) and over thresholds (sAP^m).

    ``sap`` / ``jap`` map label -> {threshold: AP}. Expected labels missing
    from ``sap`` are left out of every mean and listed in ``excluded_labels``.
    """
    jap = dict(jap or {})
    sap = dict(sap)
    excluded = [lab for lab in (expected_labels or ()) if lab not in sap]

    def by_threshold(table):
        thresholds = sorted({t for v in table.values() for t in v})
        return {t: _mean(v[t] for v in table.values() if t in v) for t in thresholds}

    sap_m_per_label = {lab: _mean(v.values()) for lab, v in sap.items()}
    jap_m_per_label = {lab: _mean(v.values()) for lab, v in jap.items()}
    return ApReport(
        sap=sap,
        jap=jap,
        msap=by_threshold(sap),
        mjap=by_threshold(jap),
        sap_m_per_label=sap_m_per_label,
        jap_m_per_label=jap_m_per_label,
        sap_m=_mean(sap_m_per_label.values()),
        jap_m=_mean(jap_m_per_label.values()),
        excluded_labels=excluded,
    )


def evaluate(line_dets: Sequence[Scored], line_gt: Sequence[LineSegment],
             junc_dets: Sequence[Scored] = (), junc_gt: Sequence[Junction] = (),
             betas=SAP_BETAS, thresholds=JAP_THRESHOLDS) -> ApReport:
    """Per-label sAP/jAP then :func:`aggregate`. Labels without ground truth are excluded."""
    sap: Dict[str, Dict[float, float]] = {}
    curves: Dict[str, dict] = {}
    for lab in SEGMENT_LABELS:
        ds = DetectionSet(list(line_dets), list(line_gt)).only_label(lab)
        if not ds.ground_truth:
            continue
        sap[lab] = {}
        for b in betas:
            res = sap_curve(ds, b)
            sap[lab][b] = res.ap
            curves[f"sAP{b}/{lab}"] = {"precision": res.precision.tolist(), "recall": res.recall.tolist()}
    jap: Dict[str, Dict[float, float]] = {}
    jlabels = sorted({g.label for g in junc_gt}, key=lambda v: (v is None, str(v)))
    for lab in jlabels:
        ds = DetectionSet(list(junc_dets), list(junc_gt)).only_label(lab)
        key = "all" if lab is None else lab
        jap[key] = {}
        for t in thresholds:
            res = jap_curve(ds, t)
            jap[key][t] = res.ap
            curves[f"jAP{t}/{key}"] = {"precision": res.precision.tolist(), "recall": res.recall.tolist()}
    report = aggregate(sap, jap)
    report.pr_curves = curves
    return report


# ------------------------------------------------------------- documents


def _float_pair(v, where):
    try:
        x, y = v
        return (float(x), float(y))
    except (TypeError, ValueError):
        raise SchemaError(where, "expected [x, y]") from None


def geometry_from_doc(doc: Mapping, scored: bool):
    """Parse ``{"segments": [...], "junctions": [...]}``; scores required when ``scored``."""
    segs, juncs = [], []
    for i, s in enumerate(doc.get("segments", [])):
        try:
            seg = LineSegment(_float_pair(s["p1"], f"segments[{i}].p1"),
                              _float_pair(s["p2"], f"segments[{i}].p2"), check_label(s["label"]))
            segs.append(Scored(seg, float(s["score"])) if scored else seg)
        except KeyError as exc:
            raise SchemaError(f"segments[{i}].{exc.args[0]}", "missing") from None
    for i, j in enumerate(doc.get("junctions", [])):
        if "point" in j:
            pt = _float_pair(j["point"], f"junctions[{i}].point")
        elif "x" in j and "y" in j:
            pt = (float(j["x"]), float(j["y"]))
        else:
            raise SchemaError(f"junctions[{i}].point", "missing")
        jn = Junction(pt, check_kind(j.get("kind", "intersection")), j.get("label"))
        try:
            juncs.append(Scored(jn, float(j["score"])) if scored else jn)
        except KeyError:
            raise SchemaError(f"junctions[{i}].score", "missing") from None
    return segs, juncs


def geometry_to_doc(segments, junctions) -> dict:
    def seg(s):
        item, score = (s.item, s.score) if isinstance(s, Scored) else (s, None)
        d = {"p1": list(item.p1), "p2": list(item.p2), "label": item.label}
        if score is not None:
            d["score"] = score
        return d

    def jun(j):
        item, score = (j.item, j.score) if isinstance(j, Scored) else (j, None)
        d = {"point": list(item.point), "kind": item.kind, "label": item.label}
        if score is not None:
            d["score"] = score
        return d

    return {"segments": [seg(s) for s in segments], "junctions": [jun(j) for j in junctions]}


def report_to_json(report: ApReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True)
