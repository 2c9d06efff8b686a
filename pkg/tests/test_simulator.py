from __future__ import annotations

import math
import warnings

import numpy as np
import pytest

from evlayout import errors
from evlayout.events import TimeWindow, write_event_stream
from evlayout.layout import Junction, LineSegment, point_segment_distance
from evlayout.simulator import (ImuSeries, MotionProfile, OmegaWarning, Pose, SensorConfig,
                                WireframeScene, generate_events, imu_angular_speed, load_motion,
                                load_scene, luminance_at, read_imu_csv, read_lux_csv, render,
                                save_motion, save_scene, transform_annotation, write_imu_csv,
                                write_lux_csv)


def line_scene(size=48, x=12.0, h=1.0):
    return WireframeScene(size, size, [LineSegment((x, 0.0), (x, size - 1.0), "wall-wall")],
                          half_thickness=h)


def sweep(px=10.0, us=20_000):
    return MotionProfile([[0, 0, 0, 0], [us, 0, px, 0]])


def test_luminance_levels_and_blend():
    s = line_scene(h=1.0)
    assert luminance_at(s, Pose(), (40, 5)) == s.background
    assert luminance_at(s, Pose(), (12, 5)) == s.line_level
    # pixel centre 1.25 px from the axis: 0.25 px beyond the band edge
    s2 = WireframeScene(48, 48, [LineSegment((10.75, 0.0), (10.75, 47.0))], half_thickness=1.0)
    want = 0.25 * s2.line_level + 0.75 * s2.background
    assert luminance_at(s2, Pose(), (12, 5)) == pytest.approx(want, abs=1e-12)
    with pytest.raises(errors.OutOfCanvas):
        luminance_at(s, Pose(), (48, 0))


def test_render_matches_pointwise():
    s = WireframeScene(20, 16, [LineSegment((2, 3), (17, 12), "floor-wall")], half_thickness=0.7)
    pose = Pose(0.1, 0.5, -0.3)
    img = render(s, pose)
    for x, y in [(0, 0), (5, 5), (10, 8), (19, 15)]:
        assert img[y, x] == pytest.approx(luminance_at(s, pose, (x, y)), abs=1e-12)


def test_scene_invariants():
    seg = [LineSegment((0, 0), (10, 0)), LineSegment((10, 0), (10, 10))]
    WireframeScene(16, 16, seg, [Junction((10, 0), "intersection")])
    with pytest.raises(errors.SceneError):
        WireframeScene(16, 16, seg, [Junction((0, 0), "intersection")])
    with pytest.raises(errors.SceneError):
        WireframeScene(16, 16, seg, [Junction((10, 0), "isolated")])
    with pytest.raises(errors.SceneError):
        WireframeScene(16, 16, seg, background=0.0)


def test_static_scene_is_silent():
    res = generate_events(line_scene(), MotionProfile.static(5_000))
    assert len(res.events) == 0


def test_event_locality():
    s = line_scene(h=1.0)
    m = sweep()
    res = generate_events(s, m, SensorConfig(step_us=10))
    assert len(res.events) > 0
    seg = s.segments[0]
    for t, x, y in zip(res.events.t[::7], res.events.x[::7], res.events.y[::7]):
        a, b = m.pose(int(t)).apply([seg.p1, seg.p2], s.center)
        assert point_segment_distance((x, y), a, b) <= s.half_thickness + 1.0


def test_threshold_monotone_and_deterministic():
    s, m = line_scene(), sweep()
    a = generate_events(s, m, SensorConfig(0.2, noise_rate_hz=50, seed=3))
    b = generate_events(s, m, SensorConfig(0.2, noise_rate_hz=50, seed=3))
    assert write_event_stream(a.events) == write_event_stream(b.events)
    lo = generate_events(s, m, SensorConfig(0.2))
    hi = generate_events(s, m, SensorConfig(0.4))
    assert len(hi.events) <= len(lo.events)


def test_k_events_for_k_thresholds():
    # a swept pixel goes bg -> line -> bg; ln(4)/0.2 = 6.93, so 6 events each way
    res = generate_events(line_scene(), sweep(), SensorConfig(0.2))
    ev = res.events
    sel = (ev.x == 17) & (ev.y == 20)
    assert (ev.p[sel] == -1).sum() == 6
    assert (ev.p[sel] == 1).sum() == 6


def test_polarity_symmetry_under_reversal():
    s = line_scene()
    fwd = generate_events(s, MotionProfile([[0, 0, 0, 0], [20_000, 0, 10, 0]]), SensorConfig()).events
    rev = generate_events(s, MotionProfile([[0, 0, 10, 0], [20_000, 0, 0, 0]]), SensorConfig()).events
    assert abs(int((fwd.p > 0).sum()) - int((rev.p > 0).sum())) <= s.height
    assert abs(int((fwd.p < 0).sum()) - int((rev.p < 0).sum())) <= s.height


def test_step_too_coarse():
    with pytest.raises(errors.StepTooCoarse):
        generate_events(line_scene(), sweep(), SensorConfig(0.1, step_us=5_000))


def test_omega_warning():
    m = MotionProfile([[0, 0, 0, 0], [10_000, 0.2, 0, 0]])  # 20 rad/s
    s = WireframeScene(8, 8, [])
    with pytest.warns(OmegaWarning):
        generate_events(s, m, SensorConfig())


def test_imu_channels():
    m = MotionProfile([[0, 0, 0, 0], [100_000, 0.4, 0, 0]])
    res = generate_events(WireframeScene(8, 8, []), m, SensorConfig())
    assert np.all(np.diff(res.imu.t) == 2500)
    assert np.allclose(res.imu.gyro[:-1, 2], 4.0)
    assert np.allclose(res.imu.accel[:, 2], 9.80665)
    assert np.all(res.lux.lux == 250)
    assert imu_angular_speed(res.imu, TimeWindow(0, 50_000)) == pytest.approx(4.0)


def test_imu_angular_speed_cases():
    t = np.array([0, 2500])
    imu = ImuSeries(t, np.zeros((2, 3)), np.array([[0, 0, 2.0], [0, 6.0, 0]]))
    assert imu_angular_speed(imu, TimeWindow(0, 5000)) == pytest.approx(4.0)
    zero = ImuSeries(t, np.zeros((2, 3)), np.zeros((2, 3)))
    assert imu_angular_speed(zero, TimeWindow(0, 5000)) == 0.0
    with pytest.raises(errors.EmptyWindow):
        imu_angular_speed(imu, TimeWindow(10_000, 10))


def test_ground_truth_transform_and_clip():
    s = WireframeScene(32, 32, [LineSegment((5, 10), (25, 10), "ceiling-wall")])
    pose = Pose(0.0, 10.0, 0.0)
    a = transform_annotation(s, pose, 123)
    assert a.timestamp == 123
    (seg,) = a.segments
    assert seg.label == "ceiling-wall"
    assert seg.p1 == pytest.approx((15, 10)) and seg.p2 == pytest.approx((31, 10))
    assert [j.kind for j in a.junctions] == ["isolated"]
    # independent rotation about the centre
    pose = Pose(math.pi / 2, 0, 0)
    seg = transform_annotation(s, pose).segments[0]
    c = 15.5
    assert seg.p1 == pytest.approx((c - (10 - c), c + (5 - c)))


def test_file_roundtrips(tmp_path):
    s = line_scene()
    save_scene(s, tmp_path / "s.json")
    assert load_scene(tmp_path / "s.json") == s
    m = MotionProfile([[0, 0.0, 0, 0], [1000, 0.1, 2.5, -1]])
    save_motion(m, tmp_path / "m.txt")
    assert np.array_equal(load_motion(tmp_path / "m.txt").keyframes, m.keyframes)
    with pytest.warns(OmegaWarning):  # 0.1 rad in 1 ms is 100 rad/s
        res = generate_events(WireframeScene(8, 8, []), m, SensorConfig())
    write_imu_csv(res.imu, tmp_path / "imu.csv")
    back = read_imu_csv(tmp_path / "imu.csv")
    assert np.array_equal(back.t, res.imu.t) and np.array_equal(back.gyro, res.imu.gyro)
    write_lux_csv(res.lux, tmp_path / "lux.csv")
    assert np.array_equal(read_lux_csv(tmp_path / "lux.csv").lux, res.lux.lux)
