from __future__ import annotations

import json

import numpy as np
import pytest

from evlayout import errors
from evlayout.layout import SEGMENT_LABELS, Junction, LineSegment
from evlayout.metrics import (DetectionSet, Scored, TABLE_COLUMNS, aggregate, average_precision,
                              compute_jap, compute_sap, evaluate, geometry_from_doc,
                              geometry_to_doc, greedy_match, jap_curve, rescale_to_eval,
                              report_to_json, sap_curve, segment_match_cost)


def seg(x1, y1, x2, y2, label="wall-wall"):
    return LineSegment((x1, y1), (x2, y2), label)


def test_rescale():
    assert rescale_to_eval(Junction((640, 360)), (1280, 720)).point == (32.0, 32.0)
    assert rescale_to_eval(Junction((1280, 720)), (1280, 720)).point == (64.0, 64.0)
    s = seg(3, 4, 5, 6)
    assert rescale_to_eval(s, (64, 64)) == s
    assert rescale_to_eval([], (10, 10)) == []
    with pytest.raises(errors.BadDims):
        rescale_to_eval(s, (0, 64))


def test_segment_cost():
    g = seg(10, 10, 20, 20)
    assert segment_match_cost(g, g) == 0
    assert segment_match_cost(seg(11, 11, 21, 21), g) == 4
    assert segment_match_cost(seg(20, 20, 10, 10), g) == 0


def test_sap_basic_cases():
    g = seg(10, 10, 20, 20)
    assert compute_sap(DetectionSet([(g, 0.9)], [g]), 5) == 1.0
    res = sap_curve(DetectionSet([(g, 0.9), (seg(10, 10, 20, 21), 0.8)], [g]), 5)
    assert res.ap == 1.0 and res.precision[1] == 0.5
    assert compute_sap(DetectionSet([(g, 0.9)], []), 5) == 0.0
    assert compute_sap(DetectionSet([], [g]), 5) == 0.0
    # label mismatch never matches
    assert compute_sap(DetectionSet([(seg(10, 10, 20, 20, "floor-wall"), 1.0)], [g]), 15) == 0.0


def test_jap_thresholds():
    g = Junction((10, 10))
    on = DetectionSet([(Junction((10, 10)), 1.0)], [g])
    off = DetectionSet([(Junction((11.5, 10)), 1.0)], [g])
    for t in (0.5, 1.0, 2.0):
        assert compute_jap(on, t) == 1.0
    assert compute_jap(off, 2.0) == 1.0
    assert compute_jap(off, 1.0) == 0.0 and compute_jap(off, 0.5) == 0.0


def test_nearer_detection_wins():
    g = Junction((10, 10))
    ds = DetectionSet([(Junction((10.8, 10)), 0.9), (Junction((10.1, 10)), 0.5)], [g])
    res = jap_curve(ds, 1.0)
    assert res.tp.tolist() == [True, False]


def test_greedy_does_not_consume_on_fp():
    # first detection's nearest GT is too far: it must not block the second
    costs = np.array([[7.0], [3.0]])
    order, tp = greedy_match(costs, [0.9, 0.1], 5.0)
    assert order.tolist() == [0, 1] and tp.tolist() == [False, True]


def test_ap_formula():
    ap, p, r = average_precision(np.array([True, False, True]), 4)
    assert ap == pytest.approx(0.25 * 1 + 0.25 * (2 / 3))
    assert r[-1] == 0.5


def test_low_confidence_extra_never_helps():
    rng = np.random.default_rng(0)
    for _ in range(100):
        gts = [seg(*rng.uniform(0, 64, 4)) for _ in range(3)]
        dets = [(seg(*(np.r_[g.p1, g.p2] + rng.normal(0, 1.5, 4))), s)
                for g, s in zip(gts, rng.uniform(0.2, 1, 3))]
        base = compute_sap(DetectionSet(dets, gts), 10)
        extra = dets + [(seg(*rng.uniform(0, 64, 4)), 0.01)]
        assert compute_sap(DetectionSet(extra, gts), 10) <= base + 1e-15


def test_equal_confidence_tie_break_is_stable():
    g = [seg(0, 0, 10, 0), seg(0, 5, 10, 5)]
    d = [(seg(0, 0, 10, 0), 0.5), (seg(0, 5, 10, 5), 0.5), (seg(30, 30, 40, 40), 0.5)]
    a = sap_curve(DetectionSet(d, g), 5)
    assert a.order.tolist() == [0, 1, 2]
    assert a.ap == compute_sap(DetectionSet([d[1], d[0], d[2]], g), 5)


def test_aggregate_and_report():
    v = 0.42
    rep = aggregate({lab: {b: v for b in (5, 10, 15)} for lab in SEGMENT_LABELS},
                    {"all": {t: v for t in (0.5, 1.0, 2.0)}})
    assert rep.sap_m == pytest.approx(v) and rep.jap_m == pytest.approx(v)
    assert all(x == pytest.approx(v) for x in rep.msap.values())
    part = aggregate({"wall-wall": {5: 1.0, 10: 1.0, 15: 1.0}})
    assert set(part.excluded_labels) == set(SEGMENT_LABELS) - {"wall-wall"}
    assert rep.to_csv("m").splitlines()[0].split(",") == TABLE_COLUMNS


def test_evaluate_perfect_and_docs():
    segs = [seg(1, 1, 30, 1, "ceiling-wall"), seg(1, 1, 1, 40, "wall-wall")]
    juncs = [Junction((1, 1), "intersection"), Junction((30, 1), "isolated")]
    doc = geometry_to_doc([Scored(s, 0.9) for s in segs], [Scored(j, 0.8) for j in juncs])
    dets, jdets = geometry_from_doc(json.loads(json.dumps(doc)), scored=True)
    gts, jgts = geometry_from_doc(geometry_to_doc(segs, juncs), scored=False)
    rep = evaluate(dets, gts, jdets, jgts)
    assert rep.sap_m == 1.0 and rep.jap_m == 1.0
    assert json.loads(report_to_json(rep))["sap_m"] == 1.0
    with pytest.raises(errors.SchemaError):
        geometry_from_doc({"segments": [{"p1": [0, 0], "p2": [1, 1], "label": "wall-wall"}]}, True)
    with pytest.raises(errors.UnknownLabel):
        geometry_from_doc({"segments": [{"p1": [0, 0], "p2": [1, 1], "label": "sofa"}]}, False)
