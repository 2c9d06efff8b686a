"""Shared helpers for the walkthrough scripts: a small room scene and an output folder."""

from __future__ import annotations

import os
from pathlib import Path

from evlayout import LineSegment, MotionProfile, WireframeScene

OUT = Path(os.environ.get("EVLAYOUT_NOTEBOOK_OUT", Path(__file__).with_name("out")))
OUT.mkdir(parents=True, exist_ok=True)


def room_scene(size: int = 96) -> WireframeScene:
    """A box-room wireframe: two vertical wall-wall edges plus ceiling and floor lines."""
    s = size - 1.0
    segs = [
        LineSegment((30, 20), (30, 75), "wall-wall"),
        LineSegment((66, 20), (66, 75), "wall-wall"),
        LineSegment((0, 5), (30, 20), "ceiling-wall"),
        LineSegment((30, 20), (66, 20), "ceiling-wall"),
        LineSegment((66, 20), (s, 5), "ceiling-wall"),
        LineSegment((0, 90), (30, 75), "floor-wall"),
        LineSegment((30, 75), (66, 75), "floor-wall"),
        LineSegment((66, 75), (s, 90), "floor-wall"),
    ]
    return WireframeScene(size, size, tuple(segs))


def pan_motion(duration_us: int = 30_000, shift_px: float = 12.0) -> MotionProfile:
    # keyframes: t_us, rotation (rad), tx, ty (px)
    return MotionProfile([[0, 0.0, 0.0, 0.0], [duration_us, 0.0, shift_px, 0.0]])
