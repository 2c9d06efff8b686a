"""Simulating an event camera panning across a room wireframe.

A grayscale wireframe is rendered at every simulation step. Each pixel keeps a
reference log-intensity and fires one event per contrast-threshold crossing.
IMU, lux and per-frame layout ground truth come out of the same run.
"""

from __future__ import annotations

import numpy as np

from _common import OUT, pan_motion, room_scene
from evlayout import SensorConfig, TimeWindow, generate_events, save_events
from evlayout.simulator import write_imu_csv, write_lux_csv

scene = room_scene()
res = generate_events(scene, pan_motion(), SensorConfig(contrast_threshold=0.2, step_us=10, seed=0))
ev = res.events
print(f"{len(ev.t)} events on a {ev.width}x{ev.height} sensor, "
      f"t in [{ev.t.min()}, {ev.t.max()}] us, ON fraction {np.mean(ev.p > 0):.2f}")

# Events cluster on the moving edges: the active pixels sit near the wireframe.
per_px = np.zeros((ev.height, ev.width), int)
np.add.at(per_px, (ev.y, ev.x), 1)
print(f"{np.count_nonzero(per_px)} active pixels, busiest fired {per_px.max()} times")

# Ground truth is the wireframe transformed by the pose at each keyframe time.
frame = res.truth.frames[-1]
print(f"{len(res.truth.frames)} ground-truth frames; last one has "
      f"{len(frame.segments)} segments, first endpoint {frame.segments[0].p1}")

# The IMU reports gravity on the z axis while the camera only translates.
print(f"IMU samples: {len(res.imu.t)}, lux samples: {len(res.lux.t)}")

save_events(ev, OUT / "room.evlk")
write_imu_csv(res.imu, OUT / "imu.csv")
write_lux_csv(res.lux, OUT / "lux.csv")
print("wrote", OUT / "room.evlk")

# A 5 ms slice, as used downstream.
w = TimeWindow(10_000, 5_000)
m = (ev.t >= w.t0) & (ev.t < w.end)
print(f"window [{w.t0}, {w.end}) holds {m.sum()} events")
