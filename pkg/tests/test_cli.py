from __future__ import annotations

import json
import struct

import numpy as np
import pytest

from evlayout.cli import main
from evlayout.events import EventStream, read_events, save_events
from evlayout.layout import Junction, LineSegment
from evlayout.metrics import Scored, geometry_to_doc
from evlayout.simulator import MotionProfile, WireframeScene, save_motion, save_scene
from evlayout.sffm import tokens_to_blob


@pytest.fixture
def inputs(tmp_path):
    scene = WireframeScene(32, 32, [LineSegment((8, 2), (8, 29), "wall-wall"),
                                    LineSegment((2, 20), (29, 20), "floor-wall")])
    save_scene(scene, tmp_path / "scene.json")
    save_motion(MotionProfile([[0, 0, 0, 0], [20_000, 0.02, 6, 0]]), tmp_path / "motion.txt")
    return tmp_path


def sim(tmp, out, *extra):
    return main(["--seed", "4", "--out-dir", str(out), "simulate", "--scene", str(tmp / "scene.json"),
                 "--motion", str(tmp / "motion.txt"), "--noise-rate", "20", *extra])


def test_simulate_deterministic(inputs):
    assert sim(inputs, inputs / "a") == 0
    assert sim(inputs, inputs / "b") == 0
    a = (inputs / "a" / "events.evlk").read_bytes()
    assert a == (inputs / "b" / "events.evlk").read_bytes()
    assert len(a) > 18
    man = json.loads((inputs / "a" / "manifest.json").read_text())
    assert man["sequences"][0]["imu"] == "imu.csv"
    assert len(man["sequences"][0]["annotations"]) == 3


def test_missing_scene_exit_2(inputs, capsys):
    missing = inputs / "nope.json"
    rc = main(["--out-dir", str(inputs / "o"), "simulate", "--scene", str(missing),
               "--motion", str(inputs / "motion.txt")])
    assert rc == 2
    assert str(missing) in capsys.readouterr().err


def test_omega_warning_continues(inputs, capsys):
    save_motion(MotionProfile([[0, 0, 0, 0], [2_000, 0.04, 0, 0]]), inputs / "fast.txt")
    rc = main(["--out-dir", str(inputs / "f"), "simulate", "--scene", str(inputs / "scene.json"),
               "--motion", str(inputs / "fast.txt"), "--max-omega", "12.8"])
    assert rc == 0
    assert "warning" in capsys.readouterr().err
    assert (inputs / "f" / "events.evlk").exists()


def test_repr_and_convert(inputs):
    sim(inputs, inputs / "s")
    ev = inputs / "s" / "events.evlk"
    assert main(["--out-dir", str(inputs / "r"), "repr", "--events", str(ev), "--kind", "est",
                 "--dt", "10000", "--bins", "3"]) == 0
    blob = (inputs / "r" / "est.bin").read_bytes()
    assert struct.unpack_from("<BIII", blob) == (3, 6, 32, 32)
    assert main(["--out-dir", str(inputs / "c"), "convert", "--input", str(ev), "--output", "ev.csv"]) == 0
    back = read_events(inputs / "c" / "ev.csv", 32, 32)
    assert back == read_events(ev)


def test_etdf_sizes_and_sweep(tmp_path):
    rng = np.random.default_rng(0)
    n = 3000
    s = EventStream(224, 224, np.sort(rng.integers(0, 5000, n)), rng.integers(0, 224, n),
                    rng.integers(0, 224, n), rng.choice([-1, 1], n))
    save_events(s, tmp_path / "ev.evlk")
    out = tmp_path / "e"
    assert main(["--out-dir", str(out), "--workers", "2", "etdf", "--events", str(tmp_path / "ev.evlk"),
                 "--t0", "0", "--windows", "1,3,5", "--patch-size", "16"]) == 0
    for dt in (1000, 3000, 5000):
        blob = (out / f"etdf_dt{dt}us_p16.bin").read_bytes()
        assert struct.unpack_from("<I", blob)[0] == 196
        assert len(blob) == 4 + 4 * 196 * 196
        assert (out / f"etdf_dt{dt}us_p16.svg").read_text().startswith("<svg")
    tokens = tmp_path / "tok.bin"
    tokens.write_bytes(tokens_to_blob(rng.normal(size=(196, 8))))
    assert main(["--out-dir", str(out), "fuse-demo", "--etdf", str(out / "etdf_dt1000us_p16.bin"),
                 "--tokens", str(tokens), "--w", "2"]) == 0
    A = np.frombuffer((out / "fused_weights.bin").read_bytes(), "<f8", offset=8).reshape(196, 196)
    assert np.allclose(A.sum(1), 1.0)
    bad = tmp_path / "bad.bin"
    bad.write_bytes(tokens_to_blob(np.full((196, 8), np.nan)))
    assert main(["--out-dir", str(out), "fuse-demo", "--etdf", str(out / "etdf_dt1000us_p16.bin"),
                 "--tokens", str(bad)]) == 3


def test_eval_perfect(tmp_path):
    segs = [LineSegment((1, 1), (40, 1), "ceiling-wall"), LineSegment((1, 1), (1, 50), "door-wall")]
    juncs = [Junction((1, 1)), Junction((40, 1), "isolated")]
    (tmp_path / "gt.json").write_text(json.dumps(geometry_to_doc(segs, juncs)))
    det = geometry_to_doc([Scored(s, 0.9) for s in segs], [Scored(j, 0.5) for j in juncs])
    (tmp_path / "det.json").write_text(json.dumps(det))
    out = tmp_path / "o"
    assert main(["--out-dir", str(out), "eval", "--detections", str(tmp_path / "det.json"),
                 "--ground-truth", str(tmp_path / "gt.json")]) == 0
    rep = json.loads((out / "report.json").read_text())
    aps = [v for lab in rep["sap"].values() for v in lab.values()]
    aps += [v for lab in rep["jap"].values() for v in lab.values()]
    assert aps and all(v == 1.0 for v in aps)
    assert rep["sap_m"] == 1.0 and rep["jap_m"] == 1.0
    assert (out / "report.csv").read_text().startswith("Methods,sAP5")


def test_eval_bad_json_exit_2(tmp_path):
    (tmp_path / "d.json").write_text("{not json")
    (tmp_path / "g.json").write_text("{}")
    assert main(["--out-dir", str(tmp_path), "eval", "--detections", str(tmp_path / "d.json"),
                 "--ground-truth", str(tmp_path / "g.json")]) == 2


def test_stats_lux_single_bin(inputs, capsys):
    sim(inputs, inputs / "s", "--lux", "150")
    out = inputs / "st"
    assert main(["--out-dir", str(out), "stats", "--manifest", str(inputs / "s" / "manifest.json"),
                 "--axis", "lux"]) == 0
    doc = json.loads((out / "stats_lux.json").read_text())
    nonzero = [r for r in doc["rows"] if r["count"]]
    assert nonzero == [{"name": "[100, 400)", "count": 1, "percent": 100.0}]
    assert main(["--out-dir", str(out), "stats", "--manifest", str(inputs / "s" / "manifest.json"),
                 "--axis", "label"]) == 0
