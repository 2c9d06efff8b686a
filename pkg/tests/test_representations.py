from __future__ import annotations

import numpy as np
import pytest

from evlayout.events import EventStream, TimeWindow
from evlayout.representations import (REPRESENTATIONS, DenseTensor, ec_sae, event_count_image,
                                      event_spike_tensor, surface_of_active_events,
                                      tensor_from_blob, voxel_grid)
from evlayout import errors

W = TimeWindow(1000, 400)


def ev(rows, w=6, h=4):
    rows = sorted(rows)
    if not rows:
        return EventStream.empty(w, h)
    t, x, y, p = zip(*rows)
    return EventStream(w, h, t, x, y, p)


def random_stream(rng, n=300, w=9, h=7, t0=1000, dt=400):
    t = np.sort(rng.integers(t0 - 50, t0 + dt + 50, n))
    return EventStream(w, h, t, rng.integers(0, w, n), rng.integers(0, h, n), rng.choice([-1, 1], n))


def test_count_modes():
    s = ev([(1001, 2, 1, 1), (1002, 2, 1, 1), (1003, 2, 1, 1), (1004, 4, 3, 1), (1005, 4, 3, -1)])
    img = event_count_image(s, W).values
    assert img.shape == (1, 4, 6)
    assert img[0, 1, 2] == 3 and img[0, 3, 4] == 2 and img.sum() == 5
    assert event_count_image(s, W, "signed").values[0, 3, 4] == 0
    two = event_count_image(s, W, "two-channel").values
    assert two[0, 1, 2] == 3 and two[1, 3, 4] == 1


def test_sae():
    s = ev([(1200, 1, 1, 1), (1100, 3, 2, -1), (1300, 3, 2, 1)])
    sae = surface_of_active_events(s, W).values[0]
    assert sae[1, 1] == 0.5
    assert sae[2, 3] == 0.75
    assert sae.sum() == 1.25
    split = surface_of_active_events(s, W, "two-channel").values
    assert split[1, 2, 3] == 0.25 and split[0, 2, 3] == 0.75


def test_voxel_kernel():
    # bins=5 over dt=400: bin centres every 100 us
    s = ev([(1100, 0, 0, 1), (1250, 1, 0, -1)])
    v = voxel_grid(s, W, 5).values
    assert v[:, 0, 0].tolist() == [0, 1, 0, 0, 0]
    assert v[:, 0, 1].tolist() == [0, 0, -0.5, -0.5, 0]


def test_est_planes():
    s = ev([(1100, 0, 0, 1), (1100, 0, 0, -1), (1150, 2, 2, 1)])
    est = event_spike_tensor(s, W, 5).values
    assert est.shape == (10, 4, 6)
    assert np.array_equal(np.abs(est[:5, 0, 0]), np.abs(est[5:, 0, 0]))
    pos_only = ev([(1100, 0, 0, 1), (1390, 5, 3, 1)])
    assert not event_spike_tensor(pos_only, W, 5).values[5:].any()


def test_ec_sae_shapes_and_relations():
    rng = np.random.default_rng(1)
    s = random_stream(rng)
    w = TimeWindow(1000, 400)
    four = ec_sae(s, w, True).values
    two = ec_sae(s, w, False).values
    assert four.shape[0] == 4 and two.shape[0] == 2
    assert np.array_equal(two[0], four[0] + four[1])
    assert np.array_equal(two[1], np.maximum(four[2], four[3]))


def test_empty_window_all_zero():
    s = ev([(5000, 1, 1, 1)])
    for name, fn in REPRESENTATIONS.items():
        t = fn(s, W, 3)
        assert not t.values.any(), name


def test_permuting_equal_timestamps():
    rows = [(1100, 1, 1, 1), (1100, 2, 1, -1), (1100, 1, 1, -1), (1250, 0, 0, 1)]
    a = EventStream(6, 4, *zip(*rows))
    perm = [rows[2], rows[0], rows[1], rows[3]]
    b = EventStream(6, 4, *zip(*perm))
    for fn in (voxel_grid, event_spike_tensor):
        assert np.array_equal(fn(a, W, 4).values, fn(b, W, 4).values)
    assert np.array_equal(event_count_image(a, W, "two-channel").values,
                          event_count_image(b, W, "two-channel").values)


def test_worker_count_invariance():
    rng = np.random.default_rng(7)
    s = random_stream(rng, n=2000)
    w = TimeWindow(1000, 400)
    for fn in (voxel_grid, event_spike_tensor):
        assert np.array_equal(fn(s, w, 5, workers=1).values, fn(s, w, 5, workers=4).values)


def test_blob_roundtrip_and_finiteness():
    t = DenseTensor(np.arange(24, dtype=float).reshape(2, 3, 4), "voxel")
    back = tensor_from_blob(t.to_blob())
    assert back.kind == "voxel" and np.array_equal(back.values, t.values)
    with pytest.raises(errors.NumericError):
        DenseTensor(np.full((1, 2, 2), np.nan))
    pgm = t.to_pgm(1)
    assert pgm.startswith(b"P5\n4 3\n255\n") and len(pgm) == 11 + 12
