"""Event temporal distribution features.

Per-pixel event-count histograms over a short window are turned into
smoothed probability vectors; pooling the pixels of a patch gives one
distribution per patch, and the matrix of directional KL divergences
between patch distributions is the ETDF map.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ._parallel import map_ordered
from .errors import (
    AnchorHasNoEvents,
    BadBinWidth,
    BadPatch,
    BinCountMismatch,
    NegativeCount,
    NumericError,
    PixelOutOfBounds,
    ValidationError,
)
from .events import EventStream, TimeWindow, window_bounds

DEFAULT_BIN_WIDTH = 200  # us
DEFAULT_EPS = 1e-6
PATCH_SIZES = (4, 8, 16)
ROW_BLOCK = 32  # fixed so results never depend on the worker count


def n_bins(dt: int, bin_width: int) -> int:
    return -(-int(dt) // int(bin_width))


def _check_bin_width(w: TimeWindow, bin_width: int) -> int:
    bw = int(bin_width)
    if bw != bin_width or bw <= 0 or bw > w.dt:
        raise BadBinWidth(f"bin width must be an integer in 1..{w.dt} us, got {bin_width}")
    return bw


@dataclass(frozen=True, eq=False)
class TemporalHistogram:
    t0: int
    dt: int
    bin_width: int
    counts: np.ndarray

    @property
    def bins(self) -> int:
        return len(self.counts)

    @property
    def total(self) -> int:
        return int(np.sum(self.counts))

    @property
    def window(self) -> TimeWindow:
        return TimeWindow(self.t0, self.dt)

    def bin_widths(self) -> np.ndarray:
        """Width of each bin inside the window (the last bin may be cut short)."""
        edges = np.minimum(np.arange(self.bins + 1) * self.bin_width, self.dt)
        return np.diff(edges).astype(np.float64)


@dataclass(frozen=True, eq=False)
class PoissonRateFn:
    """Piecewise-constant rate ``rates[k]`` (events/us) on the histogram bins."""

    t0: int
    dt: int
    bin_width: int
    rates: np.ndarray

    def integral(self, interval: Optional[TimeWindow] = None) -> float:
        if interval is None:
            interval = TimeWindow(self.t0, self.dt)
        lo, hi = interval.t0 - self.t0, interval.end - self.t0
        if lo < 0 or hi > self.dt:
            raise ValidationError("interval must lie inside the rate function's window")
        left = np.arange(len(self.rates)) * self.bin_width
        right = np.minimum(left + self.bin_width, self.dt)
        overlap = np.clip(np.minimum(right, hi) - np.maximum(left, lo), 0, None)
        return float(np.dot(self.rates, overlap))


@dataclass(frozen=True, eq=False)
class PatchDistribution:
    patch_id: Tuple[int, int]
    probs: np.ndarray
    support_count: int

    @property
    def bins(self) -> int:
        return len(self.probs)


class Rect(NamedTuple):
    x: int
    y: int
    width: int
    height: int


@dataclass(frozen=True, eq=False)
class EtdfMap:
    matrix: np.ndarray
    patch_size: int
    window: TimeWindow
    grid: Tuple[int, int]  # patch rows, patch cols
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def to_blob(self) -> bytes:
        return struct.pack("<I", self.n) + self.matrix.astype("<f4").tobytes()


def etdf_from_blob(data: bytes) -> np.ndarray:
    if len(data) < 4:
        raise ValidationError("ETDF blob too short")
    (n,) = struct.unpack_from("<I", data, 0)
    if len(data) != 4 + 4 * n * n:
        raise ValidationError(f"ETDF blob for n={n} should be {4 + 4 * n * n} bytes")
    return np.frombuffer(data, "<f4", offset=4).reshape(n, n).astype(np.float64)


# ------------------------------------------------------------ histograms


def pixel_temporal_histogram(s: EventStream, pixel, w: TimeWindow,
                             bin_width: int = DEFAULT_BIN_WIDTH) -> TemporalHistogram:
    x, y = int(pixel[0]), int(pixel[1])
    if not (0 <= x < s.width and 0 <= y < s.height):
        raise PixelOutOfBounds(f"pixel {(x, y)} outside {s.width}x{s.height}")
    bw = _check_bin_width(w, bin_width)
    lo, hi = window_bounds(s, w)
    sel = (s.x[lo:hi] == x) & (s.y[lo:hi] == y)
    k = (s.t[lo:hi][sel] - w.t0) // bw
    counts = np.bincount(k, minlength=n_bins(w.dt, bw)).astype(np.int64)
    return TemporalHistogram(w.t0, w.dt, bw, counts)


def histogram_cube(s: EventStream, w: TimeWindow, bin_width: int = DEFAULT_BIN_WIDTH) -> np.ndarray:
    """Counts for every pixel at once, shape ``(height, width, bins)``; polarity ignored."""
    bw = _check_bin_width(w, bin_width)
    nb = n_bins(w.dt, bw)
    lo, hi = window_bounds(s, w)
    flat = s.y[lo:hi].astype(np.int64) * s.width + s.x[lo:hi]
    k = (s.t[lo:hi] - w.t0) // bw
    cube = np.bincount(flat * nb + k, minlength=s.height * s.width * nb)
    return cube.reshape(s.height, s.width, nb)


def fit_poisson_rate(h: TemporalHistogram) -> PoissonRateFn:
    """Piecewise-constant MLE: each bin's count over its width inside the window."""
    rates = np.asarray(h.counts, dtype=np.float64) / h.bin_widths()
    return PoissonRateFn(h.t0, h.dt, h.bin_width, rates)


def poisson_pmf(mean: float, n: int) -> float:
    """``exp(-mean) mean**n / n!``, in log space for ``n > 20``."""
    if n < 0 or int(n) != n:
        raise NegativeCount(f"count must be a non-negative integer, got {n}")
    n = int(n)
    if mean < 0 or not math.isfinite(mean):
        raise ValidationError(f"bad Poisson mean {mean}")
    if mean == 0.0:
        return 1.0 if n == 0 else 0.0
    if n <= 20:
        return math.exp(-mean) * mean ** n / math.factorial(n)
    return math.exp(n * math.log(mean) - mean - math.lgamma(n + 1))


def poisson_count_prob(r: PoissonRateFn, interval: TimeWindow, n: int) -> float:
    """Probability of exactly ``n`` events in ``interval`` under rate ``r``."""
    if n < 0:
        raise NegativeCount(f"count must be >= 0, got {n}")
    return poisson_pmf(r.integral(interval), n)


# --------------------------------------------------------- distributions


def smooth(counts: np.ndarray, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Add ``eps`` to every bin and normalise along the last axis."""
    if not eps > 0:
        raise ValidationError("smoothing eps must be > 0")
    c = np.asarray(counts, dtype=np.float64) + eps
    return c / c.sum(axis=-1, keepdims=True)


def patch_distribution(s: EventStream, patch, w: TimeWindow, bin_width: int = DEFAULT_BIN_WIDTH,
                       eps: float = DEFAULT_EPS, patch_id=(0, 0)) -> PatchDistribution:
    x, y, pw, ph = Rect(*patch)
    if pw <= 0 or ph <= 0 or x < 0 or y < 0 or x + pw > s.width or y + ph > s.height:
        raise BadPatch(f"patch {tuple(patch)} not inside {s.width}x{s.height}")
    if not eps > 0:
        raise BadPatch("smoothing eps must be > 0")
    bw = _check_bin_width(w, bin_width)
    lo, hi = window_bounds(s, w)
    xs, ys = s.x[lo:hi], s.y[lo:hi]
    sel = (xs >= x) & (xs < x + pw) & (ys >= y) & (ys < y + ph)
    k = (s.t[lo:hi][sel] - w.t0) // bw
    counts = np.bincount(k, minlength=n_bins(w.dt, bw))
    return PatchDistribution(tuple(patch_id), smooth(counts, eps), int(counts.sum()))


def kl_divergence(P, Q) -> float:
    """Directional KL divergence ``sum P log(P/Q)`` in nats."""
    p = np.asarray(getattr(P, "probs", P), dtype=np.float64)
    q = np.asarray(getattr(Q, "probs", Q), dtype=np.float64)
    if p.shape != q.shape:
        raise BinCountMismatch(f"{p.shape} vs {q.shape}")
    if np.any(p <= 0) or np.any(q <= 0):
        raise ValidationError("distributions must be smoothed (strictly positive)")
    return float(np.sum(p * (np.log(p) - np.log(q))))


def kl_rows(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """``D[i, j] = KL(P[i] || Q[j])``, each entry reduced along a contiguous axis."""
    logp, logq = np.log(P), np.log(Q)
    d = np.sum(P[:, None, :] * (logp[:, None, :] - logq[None, :, :]), axis=-1)
    return np.maximum(d, 0.0)  # Gibbs: negatives are roundoff


def patch_counts(s: EventStream, w: TimeWindow, patch_size: int,
                 bin_width: int = DEFAULT_BIN_WIDTH) -> Tuple[np.ndarray, bool]:
    """Pooled counts ``(rows, cols, bins)``; pads with empty pixels when needed."""
    cube = histogram_cube(s, w, bin_width)
    H, W, nb = cube.shape
    ph, pw = -(-H // patch_size) * patch_size, -(-W // patch_size) * patch_size
    padded = (ph, pw) != (H, W)
    if padded:
        cube = np.pad(cube, ((0, ph - H), (0, pw - W), (0, 0)))
    rows, cols = ph // patch_size, pw // patch_size
    pooled = cube.reshape(rows, patch_size, cols, patch_size, nb).sum(axis=(1, 3))
    return pooled, padded


def etdf_map(s: EventStream, w: TimeWindow, patch_size: int = 16, bin_width: int = DEFAULT_BIN_WIDTH,
             eps: float = DEFAULT_EPS, workers: Optional[int] = 1, symmetric: bool = False) -> EtdfMap:
    """Pairwise patch KL map; row ``i`` is the query patch ``P_i``.

    Rows are computed in fixed blocks of ``ROW_BLOCK`` so 1 and N workers
    give bit-identical matrices.
    """
    if patch_size not in PATCH_SIZES:
        raise ValidationError(f"patch_size must be one of {PATCH_SIZES}")
    pooled, padded = patch_counts(s, w, patch_size, bin_width)
    rows, cols, nb = pooled.shape
    P = smooth(pooled.reshape(rows * cols, nb), eps)
    n = len(P)
    blocks = [(i, min(n, i + ROW_BLOCK)) for i in range(0, n, ROW_BLOCK)]
    parts = map_ordered(lambda b: kl_rows(P[b[0]:b[1]], P), blocks, workers)
    D = np.concatenate(parts, axis=0)
    np.fill_diagonal(D, 0.0)
    if symmetric:
        D = 0.5 * (D + D.T)
    if not np.all(np.isfinite(D)):
        raise NumericError("non-finite entry in ETDF map")
    D.flags.writeable = False
    meta = {"eps": eps, "bin_width": int(bin_width), "bins": nb, "padded": padded,
            "symmetric": symmetric, "support": pooled.sum(axis=-1).ravel().tolist()}
    return EtdfMap(D, patch_size, w, (rows, cols), meta)


class SameEdgeResult(NamedTuple):
    mask: np.ndarray  # (H, W) bool
    divergence: np.ndarray  # (H, W) KL(anchor || pixel)
    active: np.ndarray  # (H, W) bool, pixel fired in the window


def same_edge_mask(s: EventStream, anchor, w: TimeWindow, bin_width: int = DEFAULT_BIN_WIDTH,
                   eps: float = DEFAULT_EPS, tau: float = 1.0) -> SameEdgeResult:
    """Pixels whose temporal distribution is within ``tau`` nats of the anchor's."""
    ax, ay = int(anchor[0]), int(anchor[1])
    if not (0 <= ax < s.width and 0 <= ay < s.height):
        raise PixelOutOfBounds(f"anchor {(ax, ay)} outside {s.width}x{s.height}")
    cube = histogram_cube(s, w, bin_width)
    active = cube.sum(axis=-1) > 0
    if not active[ay, ax]:
        raise AnchorHasNoEvents(f"anchor {(ax, ay)} recorded no events in [{w.t0}, {w.end})")
    probs = smooth(cube, eps)
    a = probs[ay, ax]
    div = np.sum(a * (np.log(a) - np.log(probs)), axis=-1)
    div = np.maximum(div, 0.0)
    div[ay, ax] = 0.0
    return SameEdgeResult(active & (div < tau), div, active)


def sweep_windows(s: EventStream, t0: int, dts_us: Sequence[int], **kw):
    """One ETDF map per window length (the time-window sweep harness)."""
    return {int(dt): etdf_map(s, TimeWindow(t0, dt), **kw) for dt in dts_us}
