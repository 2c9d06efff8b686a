"""Contrast-threshold event simulator over labelled 2-D wireframe scenes.

A planar scene (bright background, dark or bright line bands) moves rigidly
in the image plane following piecewise-linear keyframes. Every pixel keeps a
log-luminance reference; each time the sampled log-luminance moves a whole
contrast threshold ``C`` away from it an event fires and the reference moves
to the crossed level. Crossing times are linearly interpolated inside the
simulation step. Alongside the events the simulator emits exact layout
ground truth, a 400 Hz IMU series and a lux series.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import EmptyWindow, OutOfCanvas, SceneError, StepTooCoarse, ValidationError
from .events import EventStream, TimeWindow
from .layout import (
    Junction,
    LayoutAnnotation,
    LineSegment,
    check_kind,
    check_label,
    point_segment_distance,
)

logger = logging.getLogger(__name__)

IMU_RATE_HZ = 400
IMU_PERIOD_US = 1_000_000 // IMU_RATE_HZ  # 2500 us
MAX_HEAD_OMEGA = 12.8  # rad/s
GRAVITY = 9.80665
LUX_MAX = 65535
ALIAS_LIMIT = 8  # StepTooCoarse above this many thresholds per step


class OmegaWarning(UserWarning):
    pass


# ------------------------------------------------------------------ scene


@dataclass(frozen=True)
class WireframeScene:
    width: int
    height: int
    segments: Tuple[LineSegment, ...] = ()
    junctions: Tuple[Junction, ...] = ()
    background: float = 1.0
    line_level: float = 0.25
    half_thickness: float = 1.0
    room_type: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "junctions", tuple(self.junctions))
        if self.width <= 0 or self.height <= 0:
            raise SceneError(f"bad canvas {self.width}x{self.height}")
        if not (self.background > 0 and self.line_level > 0):
            raise SceneError("luminance levels must be > 0")
        if self.half_thickness < 0:
            raise SceneError("half_thickness must be >= 0")
        if self.room_type is not None and not 1 <= self.room_type <= 8:
            raise SceneError(f"room_type must be 1-8, got {self.room_type}")
        for j in self.junctions:
            on = sum(point_segment_distance(j.point, s.p1, s.p2) <= 0.5 for s in self.segments)
            if j.kind == "intersection" and on < 2:
                raise SceneError(f"intersection junction {j.point} lies on {on} segment(s)")
            if j.kind == "isolated" and on != 1:
                raise SceneError(f"isolated junction {j.point} lies on {on} segments")

    @property
    def center(self) -> Tuple[float, float]:
        return ((self.width - 1) / 2.0, (self.height - 1) / 2.0)

    def annotation(self) -> LayoutAnnotation:
        return LayoutAnnotation(self.width, self.height, self.junctions, self.segments,
                                room_type=self.room_type)


@dataclass(frozen=True)
class Pose:
    """Rotation ``theta`` (rad) about the image centre, then translation (px)."""

    theta: float = 0.0
    tx: float = 0.0
    ty: float = 0.0

    def apply(self, pts, center) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        c, s = math.cos(self.theta), math.sin(self.theta)
        cx, cy = center
        dx, dy = pts[..., 0] - cx, pts[..., 1] - cy
        return np.stack([c * dx - s * dy + cx + self.tx, s * dx + c * dy + cy + self.ty], axis=-1)


class MotionProfile:
    """Piecewise-linear pose keyframes ``(t_us, theta, tx, ty)``."""

    def __init__(self, keyframes):
        kf = np.atleast_2d(np.asarray(keyframes, dtype=np.float64))
        if kf.ndim != 2 or kf.shape[1] != 4 or len(kf) == 0:
            raise ValidationError("keyframes must be rows of (t_us, theta, tx, ty)")
        if not np.all(np.isfinite(kf)):
            raise ValidationError("keyframes must be finite")
        if np.any(np.diff(kf[:, 0]) <= 0):
            raise ValidationError("keyframe times must be strictly increasing")
        if np.any(kf[:, 0] != np.round(kf[:, 0])):
            raise ValidationError("keyframe times must be whole microseconds")
        self.keyframes = kf
        self.keyframes.flags.writeable = False

    @classmethod
    def static(cls, duration_us: int) -> "MotionProfile":
        return cls([[0, 0, 0, 0], [duration_us, 0, 0, 0]])

    @property
    def t_start(self) -> int:
        return int(self.keyframes[0, 0])

    @property
    def t_end(self) -> int:
        return int(self.keyframes[-1, 0])

    @property
    def duration(self) -> int:
        return self.t_end - self.t_start

    def pose(self, t: float) -> Pose:
        kf = self.keyframes
        return Pose(*(float(np.interp(t, kf[:, 0], kf[:, i])) for i in (1, 2, 3)))

    def _slopes(self, col: int) -> np.ndarray:
        kf = self.keyframes
        if len(kf) < 2:
            return np.zeros(1)
        return np.diff(kf[:, col]) / np.diff(kf[:, 0]) * 1e6  # per second

    def _segment_index(self, t) -> np.ndarray:
        kf = self.keyframes
        if len(kf) < 2:
            return np.zeros(np.shape(t), dtype=int)
        idx = np.searchsorted(kf[:, 0], t, side="right") - 1
        return np.clip(idx, 0, len(kf) - 2)

    def omega(self, t) -> np.ndarray:
        """Angular speed d(theta)/dt in rad/s (right-continuous at keyframes)."""
        t = np.asarray(t, dtype=np.float64)
        if len(self.keyframes) < 2:
            return np.zeros(t.shape)
        inside = (t >= self.t_start) & (t < self.t_end)
        return np.where(inside, self._slopes(1)[self._segment_index(t)], 0.0)

    def velocity(self, t) -> np.ndarray:
        """Translation velocity (px/s) as an (..., 2) array."""
        t = np.asarray(t, dtype=np.float64)
        if len(self.keyframes) < 2:
            return np.zeros(t.shape + (2,))
        idx = self._segment_index(t)
        inside = (t >= self.t_start) & (t < self.t_end)
        v = np.stack([self._slopes(2)[idx], self._slopes(3)[idx]], axis=-1)
        return np.where(inside[..., None], v, 0.0)

    def max_omega(self) -> float:
        return float(np.max(np.abs(self._slopes(1))))


@dataclass(frozen=True)
class SensorConfig:
    contrast_threshold: float = 0.2
    step_us: int = 10
    refractory_us: int = 0
    noise_rate_hz: float = 0.0  # background events per pixel per second
    seed: int = 0
    lux: int = 250
    lux_rate_hz: float = 10.0
    metres_per_pixel: float = 1e-3
    max_omega: float = MAX_HEAD_OMEGA

    def __post_init__(self):
        if not self.contrast_threshold > 0:
            raise ValidationError("contrast threshold must be > 0")
        if int(self.step_us) <= 0:
            raise ValidationError("simulation step must be > 0")
        if self.refractory_us < 0 or self.noise_rate_hz < 0:
            raise ValidationError("refractory period and noise rate must be >= 0")
        if not 0 <= int(self.lux) <= LUX_MAX:
            raise ValidationError(f"lux must lie in 0..{LUX_MAX}")
        if not self.lux_rate_hz > 0:
            raise ValidationError("lux sampling rate must be > 0")


@dataclass(frozen=True)
class ImuSeries:
    t: np.ndarray
    accel: np.ndarray  # (n, 3) m/s^2
    gyro: np.ndarray  # (n, 3) rad/s

    def __len__(self):
        return len(self.t)


@dataclass(frozen=True)
class LuxSeries:
    t: np.ndarray
    lux: np.ndarray

    def __post_init__(self):
        lux = np.asarray(self.lux)
        if lux.size and (lux.min() < 0 or lux.max() > LUX_MAX):
            raise ValidationError(f"lux outside 0..{LUX_MAX}")

    def __len__(self):
        return len(self.t)


@dataclass(frozen=True)
class GroundTruthTrack:
    times: Tuple[int, ...]
    frames: Tuple[LayoutAnnotation, ...]

    def at(self, t: int) -> LayoutAnnotation:
        return self.frames[self.times.index(int(t))]


class SimulationResult(NamedTuple):
    events: EventStream
    truth: GroundTruthTrack
    imu: ImuSeries
    lux: LuxSeries


# ------------------------------------------------------------- rendering


def _segment_array(scene: WireframeScene) -> np.ndarray:
    if not scene.segments:
        return np.zeros((0, 2, 2))
    return np.array([[s.p1, s.p2] for s in scene.segments], dtype=np.float64)


def _distance_field(segs: np.ndarray, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Minimum distance from each pixel centre to any segment in ``segs``."""
    best = np.full(px.shape, np.inf)
    for (ax, ay), (bx, by) in segs:
        dx, dy = bx - ax, by - ay
        den = dx * dx + dy * dy
        if den == 0.0:
            d = np.hypot(px - ax, py - ay)
        else:
            s = np.clip(((px - ax) * dx + (py - ay) * dy) / den, 0.0, 1.0)
            d = np.hypot(px - (ax + s * dx), py - (ay + s * dy))
        np.minimum(best, d, out=best)
    return best


def _blend(scene: WireframeScene, dist: np.ndarray) -> np.ndarray:
    # line weight ramps 1 -> 0 across [h - 0.5, h + 0.5]
    a = np.clip(scene.half_thickness + 0.5 - dist, 0.0, 1.0)
    return a * scene.line_level + (1.0 - a) * scene.background


def render(scene: WireframeScene, pose: Pose) -> np.ndarray:
    """Luminance image (height, width) of the scene under ``pose``."""
    segs = pose.apply(_segment_array(scene), scene.center)
    py, px = np.mgrid[0:scene.height, 0:scene.width].astype(np.float64)
    return _blend(scene, _distance_field(segs, px, py))


def luminance_at(scene: WireframeScene, pose: Pose, pixel) -> float:
    x, y = int(pixel[0]), int(pixel[1])
    if not (0 <= x < scene.width and 0 <= y < scene.height):
        raise OutOfCanvas(f"pixel {(x, y)} outside {scene.width}x{scene.height}")
    segs = pose.apply(_segment_array(scene), scene.center)
    d = _distance_field(segs, np.array([float(x)]), np.array([float(y)]))
    return float(_blend(scene, d)[0])


# ---------------------------------------------------------- ground truth


def _clip(p, q, xmax, ymax):
    """Liang-Barsky clip of segment pq to [0, xmax] x [0, ymax]."""
    (x0, y0), (x1, y1) = p, q
    dx, dy = x1 - x0, y1 - y0
    u0, u1 = 0.0, 1.0
    for pk, qk in ((-dx, x0), (dx, xmax - x0), (-dy, y0), (dy, ymax - y0)):
        if pk == 0:
            if qk < 0:
                return None
            continue
        r = qk / pk
        if pk < 0:
            u0 = max(u0, r)
        else:
            u1 = min(u1, r)
        if u0 > u1:
            return None
    return (x0 + u0 * dx, y0 + u0 * dy), (x0 + u1 * dx, y0 + u1 * dy), u0 > 0, u1 < 1


def transform_annotation(scene: WireframeScene, pose: Pose, timestamp: int = 0) -> LayoutAnnotation:
    """Apply ``pose`` to the static layout and clip it to the pixel-centre hull."""
    xmax, ymax = scene.width - 1.0, scene.height - 1.0
    segments: List[LineSegment] = []
    junctions: List[Junction] = []
    for s in scene.segments:
        a, b = pose.apply([s.p1, s.p2], scene.center)
        clipped = _clip(tuple(a), tuple(b), xmax, ymax)
        if clipped is None:
            continue
        c1, c2, cut1, cut2 = clipped
        segments.append(LineSegment(c1, c2, s.label))
        if cut1:
            junctions.append(Junction(c1, "isolated", s.label))
        if cut2:
            junctions.append(Junction(c2, "isolated", s.label))
    for j in scene.junctions:
        x, y = pose.apply(j.point, scene.center)
        if 0.0 <= x <= xmax and 0.0 <= y <= ymax:
            junctions.append(Junction((x, y), j.kind, j.label))
    return LayoutAnnotation(scene.width, scene.height, tuple(junctions), tuple(segments),
                            room_type=scene.room_type, timestamp=int(timestamp))


# ------------------------------------------------------------ generation


def _threshold_events(log_prev, log_now, ref, t_prev, step, C, flat_index):
    """Crossings of the reference grid between two samples of one step."""
    delta = log_now - ref
    n = np.floor(np.abs(delta) / C + 1e-9).astype(np.int64)
    hit = np.flatnonzero(n)
    if hit.size == 0:
        return None
    counts = n[hit]
    sign = np.sign(delta[hit])
    pix = np.repeat(hit, counts)
    k = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts) + 1
    level = ref[pix] + np.repeat(sign, counts) * k * C
    lp, ln = log_prev[pix], log_now[pix]
    span = ln - lp
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(span != 0, (level - lp) / span, 1.0)
    t = t_prev + np.rint(np.clip(frac, 0.0, 1.0) * step).astype(np.int64)
    ref[hit] += sign * counts * C
    return flat_index[pix], t, np.repeat(sign, counts).astype(np.int8)


def _apply_refractory(pix, t, p, last_t, refractory):
    keep = np.ones(len(t), dtype=bool)
    for i in range(len(t)):
        if t[i] - last_t[pix[i]] < refractory:
            keep[i] = False
        else:
            last_t[pix[i]] = t[i]
    return keep


def _imu(motion: MotionProfile, cfg: SensorConfig) -> ImuSeries:
    t = np.arange(motion.t_start, motion.t_end + 1, IMU_PERIOD_US, dtype=np.int64)
    gyro = np.zeros((len(t), 3))
    gyro[:, 2] = motion.omega(t)
    half = IMU_PERIOD_US / 2.0
    dv = motion.velocity(t + half) - motion.velocity(t - half)
    accel = np.zeros((len(t), 3))
    accel[:, :2] = dv * cfg.metres_per_pixel / (IMU_PERIOD_US * 1e-6)
    accel[:, 2] = GRAVITY
    return ImuSeries(t, accel, gyro)


def _lux(motion: MotionProfile, cfg: SensorConfig) -> LuxSeries:
    period = max(1, int(round(1e6 / cfg.lux_rate_hz)))
    t = np.arange(motion.t_start, motion.t_end + 1, period, dtype=np.int64)
    return LuxSeries(t, np.full(len(t), int(cfg.lux), dtype=np.int64))


def generate_events(scene: WireframeScene, motion: MotionProfile, cfg: SensorConfig = SensorConfig(),
                    gt_times: Optional[Sequence[int]] = None) -> SimulationResult:
    """Simulate the sensor over ``motion``'s time span.

    ``gt_times`` defaults to a 10 ms grid from the first keyframe.
    Raises :class:`StepTooCoarse` when a pixel's log-luminance moves more
    than ``8 * C`` within one step.
    """
    C = float(cfg.contrast_threshold)
    step = int(cfg.step_us)
    omax = motion.max_omega()
    if omax > cfg.max_omega:
        msg = f"motion reaches {omax:.2f} rad/s, above the {cfg.max_omega} rad/s ceiling"
        logger.warning(msg)
        warnings.warn(msg, OmegaWarning, stacklevel=2)

    H, W = scene.height, scene.width
    py, px = np.mgrid[0:H, 0:W].astype(np.float64)
    px, py = px.ravel(), py.ravel()
    flat_index = np.arange(H * W, dtype=np.int64)
    segs0 = _segment_array(scene)

    def log_frame(t):
        segs = motion.pose(t).apply(segs0, scene.center)
        return np.log(_blend(scene, _distance_field(segs, px, py)))

    times = np.arange(motion.t_start, motion.t_end + 1, step, dtype=np.int64)
    if times[-1] != motion.t_end:
        times = np.append(times, motion.t_end)

    log_prev = log_frame(times[0])
    ref = log_prev.copy()
    last_t = np.full(H * W, np.iinfo(np.int64).min // 2, dtype=np.int64)
    chunks = []
    for t_prev, t_now in zip(times[:-1], times[1:]):
        log_now = log_frame(t_now)
        jump = np.max(np.abs(log_now - log_prev)) if log_now.size else 0.0
        if jump > ALIAS_LIMIT * C:
            raise StepTooCoarse(
                f"log-luminance jumped {jump:.3f} (> {ALIAS_LIMIT}*C) between "
                f"t={t_prev} and t={t_now}; reduce step_us"
            )
        out = _threshold_events(log_prev, log_now, ref, int(t_prev), int(t_now - t_prev), C, flat_index)
        if out is not None:
            pix, t, p = out
            if cfg.refractory_us > 0:
                keep = _apply_refractory(pix, t, p, last_t, cfg.refractory_us)
                pix, t, p = pix[keep], t[keep], p[keep]
            chunks.append((pix, t, p))
        log_prev = log_now

    rng = np.random.default_rng(cfg.seed)
    if cfg.noise_rate_hz > 0 and motion.duration > 0:
        counts = rng.poisson(cfg.noise_rate_hz * motion.duration * 1e-6, size=H * W)
        pix = np.repeat(flat_index, counts)
        t = rng.integers(motion.t_start, motion.t_end, size=len(pix), endpoint=True)
        p = rng.choice(np.array([-1, 1], dtype=np.int8), size=len(pix))
        chunks.append((pix, t.astype(np.int64), p))

    if chunks:
        pix = np.concatenate([c[0] for c in chunks])
        t = np.concatenate([c[1] for c in chunks])
        p = np.concatenate([c[2] for c in chunks])
    else:
        pix = t = np.zeros(0, np.int64)
        p = np.zeros(0, np.int8)
    y, x = np.divmod(pix, W)
    order = np.lexsort((p, x, y, t))
    events = EventStream(W, H, t[order], x[order], y[order], p[order])

    if gt_times is None:
        gt_times = range(motion.t_start, motion.t_end + 1, 10_000)
    gt_times = tuple(int(v) for v in gt_times)
    frames = tuple(transform_annotation(scene, motion.pose(tt), tt) for tt in gt_times)
    return SimulationResult(events, GroundTruthTrack(gt_times, frames), _imu(motion, cfg), _lux(motion, cfg))


def imu_angular_speed(imu: ImuSeries, window: TimeWindow) -> float:
    """Mean gyro-vector norm over the samples inside ``window``."""
    t = np.asarray(imu.t)
    sel = (t >= window.t0) & (t < window.end)
    if not np.any(sel):
        raise EmptyWindow(f"no IMU samples in [{window.t0}, {window.end})")
    return float(np.mean(np.linalg.norm(np.asarray(imu.gyro)[sel], axis=1)))


# ------------------------------------------------------------------- files


def scene_to_dict(scene: WireframeScene) -> dict:
    return {
        "version": 1,
        "width": scene.width,
        "height": scene.height,
        "background": scene.background,
        "line_level": scene.line_level,
        "half_thickness": scene.half_thickness,
        "room_type": scene.room_type,
        "segments": [{"p1": list(s.p1), "p2": list(s.p2), "label": s.label} for s in scene.segments],
        "junctions": [{"x": j.point[0], "y": j.point[1], "kind": j.kind} for j in scene.junctions],
    }


def scene_from_dict(doc: dict) -> WireframeScene:
    try:
        segments = tuple(
            LineSegment(tuple(s["p1"]), tuple(s["p2"]), check_label(s["label"]))
            for s in doc.get("segments", [])
        )
        junctions = tuple(
            Junction((j["x"], j["y"]), check_kind(j.get("kind", "intersection")))
            for j in doc.get("junctions", [])
        )
        return WireframeScene(
            int(doc["width"]), int(doc["height"]), segments, junctions,
            background=float(doc.get("background", 1.0)),
            line_level=float(doc.get("line_level", 0.25)),
            half_thickness=float(doc.get("half_thickness", 1.0)),
            room_type=doc.get("room_type"),
        )
    except (KeyError, TypeError) as exc:
        raise SceneError(f"scene document missing or malformed field: {exc}") from None


def load_scene(path) -> WireframeScene:
    with open(path, encoding="utf-8") as fh:
        try:
            return scene_from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise SceneError(f"{path}: {exc}") from None


def save_scene(scene: WireframeScene, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scene_to_dict(scene), fh, indent=2)


def load_motion(path) -> MotionProfile:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValidationError(f"{path}:{lineno}: expected 't_us theta_rad tx_px ty_px'")
            try:
                rows.append([float(v) for v in parts])
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-numeric keyframe") from None
    return MotionProfile(rows)


def save_motion(motion: MotionProfile, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# t_us theta_rad tx_px ty_px\n")
        for t, th, tx, ty in motion.keyframes:
            fh.write(f"{int(t)} {float(th)!r} {float(tx)!r} {float(ty)!r}\n")


def write_imu_csv(imu: ImuSeries, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t_us,ax,ay,az,gx,gy,gz\n")
        for t, a, g in zip(imu.t, imu.accel, imu.gyro):
            fh.write(",".join([str(int(t))] + [repr(float(v)) for v in (*a, *g)]) + "\n")


def read_imu_csv(path) -> ImuSeries:
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if arr.size == 0:
        return ImuSeries(np.zeros(0, np.int64), np.zeros((0, 3)), np.zeros((0, 3)))
    return ImuSeries(arr[:, 0].astype(np.int64), arr[:, 1:4], arr[:, 4:7])


def write_lux_csv(lux: LuxSeries, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t_us,lux\n")
        for t, v in zip(lux.t, lux.lux):
            fh.write(f"{int(t)},{int(v)}\n")


def read_lux_csv(path) -> LuxSeries:
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, dtype=np.int64)
    if arr.size == 0:
        return LuxSeries(np.zeros(0, np.int64), np.zeros(0, np.int64))
    return LuxSeries(arr[:, 0], arr[:, 1])
