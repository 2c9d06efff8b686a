"""Scoring wireframe detections with structural and junction AP.

Detections are ranked by confidence; each takes the cheapest unmatched
ground-truth item of its label if the cost is within the threshold. AP sums
precision over recall steps, per label and threshold, then averages.
"""

from __future__ import annotations

from evlayout import Junction, LineSegment, Scored, compute_sap, evaluate
from evlayout.metrics import DetectionSet

gt = [LineSegment((10, 10), (10, 50), "wall-wall"),
      LineSegment((40, 10), (40, 50), "wall-wall"),
      LineSegment((10, 10), (40, 10), "ceiling-wall")]
dets = [Scored(LineSegment((10.5, 10), (10.5, 50), "wall-wall"), 0.9),
        Scored(LineSegment((25, 10), (25, 50), "wall-wall"), 0.8),  # a false positive
        Scored(LineSegment((40, 11), (40, 49), "wall-wall"), 0.7),
        Scored(LineSegment((10, 11), (40, 11), "ceiling-wall"), 0.6)]

ww = DetectionSet(dets, gt).only_label("wall-wall")
for beta in (5, 10, 15):
    print(f"wall-wall sAP{beta} = {compute_sap(ww, beta):.3f}")

jgt = [Junction((10, 10)), Junction((40, 10))]
jdet = [Scored(Junction((10.3, 10.2)), 0.9), Scored(Junction((39, 12)), 0.5)]
report = evaluate(dets, gt, jdet, jgt)
print(f"sAP^m {100 * report.sap_m:.1f}, jAP^m {100 * report.jap_m:.1f}")
print("labels without ground truth, left out of the means:", report.excluded_labels)
