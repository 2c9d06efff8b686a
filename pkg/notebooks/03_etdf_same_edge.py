"""Temporal distributions separate pixels on the same edge from the rest.

Each pixel's event times within a window form a histogram. Pixels swept by the
same straight edge fire in the same order, so their histograms are close in
KL divergence, while pixels elsewhere are not. Patch-level maps of pairwise
divergence are the features fed to the fusion module.
"""

from __future__ import annotations

import numpy as np

from _common import OUT
from evlayout import (LineSegment, MotionProfile, SensorConfig, TimeWindow, WireframeScene,
                      etdf_map, generate_events, kl_divergence, same_edge_mask)
from evlayout.etdf import histogram_cube, smooth
from evlayout.svg import heatmap, mask_pgm

# KL basics: zero for identical inputs, positive otherwise, not symmetric.
P, Q = smooth(np.array([3, 1, 0, 0])), smooth(np.array([1, 1, 2, 4]))
print(f"D(P||P)={kl_divergence(P, P):.3g}  D(P||Q)={kl_divergence(P, Q):.3f}  D(Q||P)={kl_divergence(Q, P):.3f}")

# One vertical edge moving right, with background noise.
size = 128
scene = WireframeScene(size, size, (LineSegment((40, 0), (40, size - 1), "wall-wall"),))
motion = MotionProfile([[0, 0, 0, 0], [20_000, 0, 10, 0]])
ev = generate_events(scene, motion, SensorConfig(0.2, noise_rate_hz=20, seed=1)).events
w = TimeWindow(8_000, 2_000)

cube = histogram_cube(ev, w, 200)
row = size // 2
anchor = (int(np.argmax(cube[row].sum(-1))), row)
r = same_edge_mask(ev, anchor, w, 200, 1e-6, tau=1.0)
cols = np.arange(size)[None, :]
same = r.active & (cols == anchor[0])
other = r.active & (np.abs(cols - anchor[0]) >= 5)
print(f"anchor {anchor}: mean KL to same-column pixels {r.divergence[same].mean():.3f}, "
      f"to far pixels {r.divergence[other].mean():.3f}")
(OUT / "same_edge.pgm").write_bytes(mask_pgm(r.mask))

# Patch map across window lengths: longer windows give more bins per histogram.
for dt in (1_000, 3_000, 5_000):
    m = etdf_map(ev, TimeWindow(5_000, dt), patch_size=16, bin_width=100)
    print(f"dt={dt // 1000} ms: {m.n}x{m.n} map, {m.meta['bins']} bins, max {m.matrix.max():.2f}")
(OUT / "etdf.svg").write_text(heatmap(m.matrix, "patch KL, dt=5 ms"))
print("wrote", OUT / "same_edge.pgm", OUT / "etdf.svg")
