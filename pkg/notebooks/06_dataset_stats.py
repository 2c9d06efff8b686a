"""Dataset statistics: label shares and per-sequence binning.

Label counts are tallied over annotations. Sequences are binned by the mean
of a per-sequence series (lux, IMU angular speed, ...) into half-open bins.
"""

from __future__ import annotations

from _common import pan_motion, room_scene
from evlayout import SensorConfig, bin_sequences, generate_events, label_stats
from evlayout.annotations import SequenceData

scene = room_scene()
runs = []
for i, lux in enumerate((30, 150, 250, 600)):
    res = generate_events(scene, pan_motion(10_000, 4 + 2 * i), SensorConfig(lux=lux, seed=i))
    runs.append((f"seq{i}", res))

table = label_stats([f for _, r in runs for f in r.truth.frames])
print(table.to_csv())

seqs = [SequenceData(sid, imu=r.imu, lux=r.lux, annotations=r.truth.frames) for sid, r in runs]
for axis in ("lux", "angular_speed"):
    t = bin_sequences(seqs, axis)
    print(axis, t.counts(), t.assignments)
