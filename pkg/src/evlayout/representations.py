"""Dense event representations: count image, SAE, voxel grid, EST, EC+SAE.

All builders take a stream plus a half-open window and return a
``DenseTensor`` of shape ``(channels, height, width)``. Accumulation is
done in integers (counts, or temporal weights scaled by ``dt``) so results
do not depend on event order among equal timestamps or on how the stream is
chunked across workers.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._parallel import chunk_ranges, map_ordered
from .errors import NumericError, ValidationError
from .events import EventStream, TimeWindow, window_bounds

KIND_TAGS = {"count": 0, "sae": 1, "voxel": 2, "est": 3, "ec_sae": 4, "other": 255}
DEFAULT_BINS = 5
CHUNK = 1 << 22
_BLOB_HEADER = struct.Struct("<BIII")


@dataclass(frozen=True, eq=False)
class DenseTensor:
    values: np.ndarray
    kind: str = "other"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 3 or min(v.shape) <= 0:
            raise ValidationError(f"dense tensor needs 3 positive dims, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise NumericError(f"non-finite values in {self.kind} tensor")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def dims(self):
        return self.values.shape

    def to_blob(self) -> bytes:
        c, h, w = self.values.shape
        tag = KIND_TAGS.get(self.kind, KIND_TAGS["other"])
        return _BLOB_HEADER.pack(tag, c, h, w) + self.values.astype("<f4").tobytes()

    def to_pgm(self, channel: int = 0) -> bytes:
        """8-bit binary PGM of one channel, min-max stretched."""
        img = self.values[channel]
        lo, hi = float(img.min()), float(img.max())
        scale = 255.0 / (hi - lo) if hi > lo else 0.0
        pix = np.rint((img - lo) * scale).astype(np.uint8)
        h, w = pix.shape
        return f"P5\n{w} {h}\n255\n".encode("ascii") + pix.tobytes()


def tensor_from_blob(data: bytes) -> DenseTensor:
    if len(data) < _BLOB_HEADER.size:
        raise ValidationError("tensor blob too short")
    tag, c, h, w = _BLOB_HEADER.unpack_from(data, 0)
    need = _BLOB_HEADER.size + 4 * c * h * w
    if len(data) != need:
        raise ValidationError(f"tensor blob should be {need} bytes, got {len(data)}")
    kind = {v: k for k, v in KIND_TAGS.items()}.get(tag, "other")
    vals = np.frombuffer(data, "<f4", offset=_BLOB_HEADER.size).reshape(c, h, w)
    return DenseTensor(vals.astype(np.float64), kind)


def _window_chunks(s: EventStream, w: TimeWindow):
    lo, hi = window_bounds(s, w)
    return [(lo + a, lo + b) for a, b in chunk_ranges(hi - lo, CHUNK)]


def _flat_index(s: EventStream, a: int, b: int) -> np.ndarray:
    idx = s.y[a:b].astype(np.int64)
    idx *= s.width
    idx += s.x[a:b]
    return idx


def _meta(w: TimeWindow, **kw) -> dict:
    return {"t0": w.t0, "dt": w.dt, **kw}


def _counts(s: EventStream, w: TimeWindow, workers: Optional[int]) -> np.ndarray:
    """(2, H*W) int64 counts of positive and negative events."""
    n = s.width * s.height

    def work(rng):
        a, b = rng
        idx = _flat_index(s, a, b)
        pos = s.p[a:b] > 0
        allc = np.bincount(idx, minlength=n)
        posc = np.bincount(idx[pos], minlength=n)
        return np.stack([posc, allc - posc])

    parts = map_ordered(work, _window_chunks(s, w), workers)
    return np.sum(parts, axis=0, dtype=np.int64)


def event_count_image(s: EventStream, w: TimeWindow, polarity: str = "unsigned",
                      workers: Optional[int] = 1) -> DenseTensor:
    """Per-pixel event counts; ``polarity`` is unsigned, signed or two-channel."""
    if polarity not in ("unsigned", "signed", "two-channel"):
        raise ValidationError(f"unknown polarity mode {polarity!r}")
    H, W = s.height, s.width
    if polarity == "unsigned":
        # single bincount, the throughput-critical path
        n = W * H

        def work(rng):
            return np.bincount(_flat_index(s, *rng), minlength=n)

        parts = map_ordered(work, _window_chunks(s, w), workers)
        img = np.sum(parts, axis=0, dtype=np.int64)[None]
    else:
        pc = _counts(s, w, workers)
        img = (pc[0] - pc[1])[None] if polarity == "signed" else pc
    return DenseTensor(img.reshape(-1, H, W).astype(np.float64), "count",
                       _meta(w, polarity=polarity))


def _latest(s: EventStream, w: TimeWindow, sel_polarity: Optional[int]) -> np.ndarray:
    H, W = s.height, s.width
    out = np.zeros(H * W, dtype=np.float64)
    for a, b in _window_chunks(s, w):
        idx = _flat_index(s, a, b)
        t = s.t[a:b]
        if sel_polarity is not None:
            keep = s.p[a:b] == sel_polarity
            idx, t = idx[keep], t[keep]
        # timestamps are sorted: the last occurrence per pixel is the latest
        uniq, first_rev = np.unique(idx[::-1], return_index=True)
        out[uniq] = (t[::-1][first_rev] - w.t0) / w.dt
    return out.reshape(H, W)


def surface_of_active_events(s: EventStream, w: TimeWindow, polarity: str = "merged") -> DenseTensor:
    """Latest timestamp per pixel mapped to ``(t - t0) / dt``; 0 where silent."""
    if polarity == "merged":
        vals = _latest(s, w, None)[None]
    elif polarity == "two-channel":
        vals = np.stack([_latest(s, w, 1), _latest(s, w, -1)])
    else:
        raise ValidationError(f"unknown polarity mode {polarity!r}")
    return DenseTensor(vals, "sae", _meta(w, polarity=polarity))


def _temporal_numerators(s: EventStream, w: TimeWindow, bins: int, split: bool,
                         workers: Optional[int]) -> np.ndarray:
    """Linear-in-time deposits scaled by ``dt`` (exact integers).

    With ``t* = (t - t0)(bins - 1)/dt`` an event deposits ``p (1 - frac)``
    into bin ``floor(t*)`` and ``p frac`` into the next one; multiplied by
    ``dt`` both weights are integers.
    """
    if int(bins) < 1:
        raise ValidationError("bins must be >= 1")
    H, W = s.height, s.width
    n = H * W
    planes = 2 if split else 1
    size = planes * bins * n

    def work(rng):
        a, b = rng
        idx = _flat_index(s, a, b)
        rel = (s.t[a:b] - w.t0) * (bins - 1)
        k, r = np.divmod(rel, w.dt)
        p = s.p[a:b].astype(np.int64)
        plane = (p < 0).astype(np.int64) if split else 0
        base = (plane * bins + k) * n + idx
        acc = _int_bincount(base, p * (w.dt - r), size)
        nxt = r > 0
        acc += _int_bincount(base[nxt] + n, p[nxt] * r[nxt], size)
        return acc

    parts = map_ordered(work, _window_chunks(s, w), workers)
    total = np.sum(parts, axis=0, dtype=np.int64)
    return total.reshape(planes * bins, H, W)


def _int_bincount(index: np.ndarray, weights: np.ndarray, size: int) -> np.ndarray:
    # float64 sums of integers stay exact below 2**53
    out = np.bincount(index, weights=weights.astype(np.float64), minlength=size)
    return np.rint(out).astype(np.int64)


def voxel_grid(s: EventStream, w: TimeWindow, bins: int = DEFAULT_BINS,
               workers: Optional[int] = 1) -> DenseTensor:
    num = _temporal_numerators(s, w, bins, False, workers)
    return DenseTensor(num / w.dt, "voxel", _meta(w, bins=bins))


def event_spike_tensor(s: EventStream, w: TimeWindow, bins: int = DEFAULT_BINS,
                       workers: Optional[int] = 1) -> DenseTensor:
    """Voxel kernel with polarity planes: channels ``[+bins..., -bins...]``.

    Negative planes keep the signed (negative) deposit, so summing the two
    halves channel by channel gives the signed voxel grid.
    """
    num = _temporal_numerators(s, w, bins, True, workers)
    return DenseTensor(num / w.dt, "est", _meta(w, bins=bins))


def ec_sae(s: EventStream, w: TimeWindow, with_polarity: bool = True) -> DenseTensor:
    if with_polarity:
        counts = event_count_image(s, w, "two-channel").values
        sae = surface_of_active_events(s, w, "two-channel").values
    else:
        counts = event_count_image(s, w, "unsigned").values
        sae = surface_of_active_events(s, w, "merged").values
    return DenseTensor(np.concatenate([counts, sae]), "ec_sae",
                       _meta(w, with_polarity=bool(with_polarity)))


REPRESENTATIONS = {
    "count": lambda s, w, bins: event_count_image(s, w, "unsigned"),
    "sae": lambda s, w, bins: surface_of_active_events(s, w),
    "voxel": lambda s, w, bins: voxel_grid(s, w, bins),
    "est": lambda s, w, bins: event_spike_tensor(s, w, bins),
    "ec_sae": lambda s, w, bins: ec_sae(s, w, True),
    "ec_sae_star": lambda s, w, bins: ec_sae(s, w, False),
}
