"""Turning an event window into dense tensors.

Event count images, the surface of active events, voxel grids, event spike
tensors and the stacked count+timestamp input all come from one window.
"""

from __future__ import annotations

import numpy as np

from _common import OUT, pan_motion, room_scene
from evlayout import (SensorConfig, TimeWindow, ec_sae, event_count_image, event_spike_tensor,
                      generate_events, surface_of_active_events, voxel_grid)
from evlayout.svg import gray_pgm

ev = generate_events(room_scene(), pan_motion(), SensorConfig(seed=0)).events
w = TimeWindow(10_000, 5_000)

ec = event_count_image(ev, w)
sae = surface_of_active_events(ev, w)
vox = voxel_grid(ev, w, bins=5)
est = event_spike_tensor(ev, w, bins=5)
stack = ec_sae(ev, w)
for name, t in [("count", ec), ("SAE", sae), ("voxel", vox), ("EST", est), ("EC+SAE", stack)]:
    print(f"{name:7s} shape {t.values.shape}")

# Voxel bins split each event between its two nearest temporal bins,
# so the grid's total mass equals the signed event count.
m = (ev.t >= w.t0) & (ev.t < w.end)
print(f"voxel mass {vox.values.sum():.3f} vs signed count {ev.p[m].sum()}")

# The EST keeps polarities apart; summing its halves gives the voxel grid back.
half = est.values.shape[0] // 2
print("EST halves sum to voxel grid:", np.allclose(est.values[:half] + est.values[half:], vox.values))

# Results are independent of the worker count.
print("1 vs 4 workers identical:",
      event_count_image(ev, w, workers=1).values.tobytes() == event_count_image(ev, w, workers=4).values.tobytes())

(OUT / "count.pgm").write_bytes(gray_pgm(ec.values.reshape(ev.height, ev.width)))
(OUT / "sae.pgm").write_bytes(gray_pgm(sae.values.reshape(ev.height, ev.width)))
print("wrote", OUT / "count.pgm", OUT / "sae.pgm")
