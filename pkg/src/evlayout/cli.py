"""Batch command line: ``evlayout <subcommand> [options]``.

Exit codes: 0 success, 2 input validation failure, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from typing import List, Optional

import numpy as np

from . import annotations as ann
from . import etdf as etdf_mod
from . import metrics, representations, sffm, simulator, svg
from ._parallel import default_workers
from .errors import NumericError, ValidationError
from .events import TimeWindow, guess_format, read_events, save_events

log = logging.getLogger("evlayout")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


def _ints(text: str) -> List[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _floats(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _require_file(path: str) -> str:
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    return path


def _out(args, name: str) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def _write(path: str, data) -> None:
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(path, mode) as fh:
        fh.write(data)
    log.info("wrote %s", path)


def _load_stream(args):
    return read_events(_require_file(args.events), args.width, args.height)


def _window(args, stream) -> TimeWindow:
    t0 = args.t0 if args.t0 is not None else (int(stream.t[0]) if len(stream) else 0)
    return TimeWindow(t0, args.dt)


# ------------------------------------------------------------ subcommands


def cmd_simulate(args) -> int:
    scene = simulator.load_scene(_require_file(args.scene))
    motion = simulator.load_motion(_require_file(args.motion))
    cfg = simulator.SensorConfig(
        contrast_threshold=args.contrast, step_us=args.step_us, refractory_us=args.refractory_us,
        noise_rate_hz=args.noise_rate, seed=args.seed, lux=args.lux, max_omega=args.max_omega,
    )
    gt_times = range(motion.t_start, motion.t_end + 1, args.gt_every_us)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", simulator.OmegaWarning)
        res = simulator.generate_events(scene, motion, cfg, gt_times)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)

    ext = "csv" if args.format == "csv" else "evlk"
    events_path = _out(args, f"events.{ext}")
    save_events(res.events, events_path)
    simulator.write_imu_csv(res.imu, _out(args, "imu.csv"))
    simulator.write_lux_csv(res.lux, _out(args, "lux.csv"))
    gt_dir = _out(args, "gt")
    os.makedirs(gt_dir, exist_ok=True)
    gt_paths = []
    for frame in res.truth.frames:
        p = os.path.join(gt_dir, f"gt_{frame.timestamp:010d}.json")
        ann.save_annotation(frame, p)
        gt_paths.append(p)
    seq = ann.SequenceManifest(args.sequence_id, args.mode, events=events_path,
                               annotations=tuple(gt_paths), imu=_out(args, "imu.csv"),
                               lux=_out(args, "lux.csv"), scene=os.path.basename(args.scene))
    ann.save_manifest([seq], _out(args, "manifest.json"))
    print(json.dumps({"events": len(res.events), "gt_frames": len(gt_paths),
                      "max_omega": motion.max_omega()}))
    return EXIT_OK


def cmd_repr(args) -> int:
    stream = _load_stream(args)
    w = _window(args, stream)
    tensor = representations.REPRESENTATIONS[args.kind](stream, w, args.bins)
    _write(_out(args, f"{args.kind}.bin"), tensor.to_blob())
    for c in range(tensor.dims[0]):
        _write(_out(args, f"{args.kind}_c{c}.pgm"), tensor.to_pgm(c))
    print(json.dumps({"kind": args.kind, "dims": list(tensor.dims), "t0": w.t0, "dt": w.dt}))
    return EXIT_OK


def cmd_etdf(args) -> int:
    stream = _load_stream(args)
    t0 = args.t0 if args.t0 is not None else (int(stream.t[0]) if len(stream) else 0)
    dts = [int(round(ms * 1000)) for ms in args.windows] if args.windows else [args.dt]
    summary = []
    for dt in dts:
        w = TimeWindow(t0, dt)
        m = etdf_mod.etdf_map(stream, w, args.patch_size, args.bin_width, args.eps,
                              workers=args.workers, symmetric=args.symmetric)
        stem = f"etdf_dt{dt}us_p{args.patch_size}"
        _write(_out(args, stem + ".bin"), m.to_blob())
        _write(_out(args, stem + ".svg"), svg.heatmap(m.matrix, f"ETDF dt={dt}us patch={args.patch_size}"))
        summary.append({"dt_us": dt, "n": m.n, "file": stem + ".bin", "padded": m.meta["padded"],
                        "max": float(m.matrix.max()), "mean": float(m.matrix.mean())})
        if args.anchor:
            ax, ay = _ints(args.anchor)
            res = etdf_mod.same_edge_mask(stream, (ax, ay), w, args.bin_width, args.eps, args.tau)
            _write(_out(args, f"same_edge_dt{dt}us_div.pgm"), svg.gray_pgm(res.divergence))
            _write(_out(args, f"same_edge_dt{dt}us_mask.pgm"), svg.mask_pgm(res.mask))
            summary[-1]["same_edge_pixels"] = int(res.mask.sum())
    _write(_out(args, "etdf_summary.json"), json.dumps(summary, indent=2))
    print(json.dumps(summary))
    return EXIT_OK


def cmd_fuse_demo(args) -> int:
    with open(_require_file(args.etdf), "rb") as fh:
        E = etdf_mod.etdf_from_blob(fh.read())
    rng = np.random.default_rng(args.seed)
    if args.tokens:
        with open(_require_file(args.tokens), "rb") as fh:
            X = sffm.tokens_from_blob(fh.read())
    else:
        X = rng.normal(size=(E.shape[0], args.d_model))
    params = sffm.AttentionParams.random(X.shape[1], args.d_head, rng, w=args.w, tau=args.tau_f, phi=args.phi)
    A = sffm.attention_weights(X, E, params)
    _write(_out(args, "fused_weights.bin"), sffm.tokens_to_blob(A))
    _write(_out(args, "fused_weights.svg"), svg.heatmap(A, f"fused attention w={args.w} tau={args.tau_f}"))
    print(json.dumps({"n": int(A.shape[0]), "row_sum_max_err": float(np.max(np.abs(A.sum(1) - 1)))}))
    return EXIT_OK


def _load_json(path):
    with open(_require_file(path), encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: {exc}") from None


def cmd_eval(args) -> int:
    det_doc = _load_json(args.detections)
    gt_doc = _load_json(args.ground_truth)
    dets, jdets = metrics.geometry_from_doc(det_doc, scored=True)
    gts, jgts = metrics.geometry_from_doc(gt_doc, scored=False)
    if args.native:
        native = tuple(_floats(args.native))
        dets, jdets, gts, jgts = (metrics.rescale_to_eval(list(g), native) for g in (dets, jdets, gts, jgts))
    report = metrics.evaluate(dets, gts, jdets, jgts)
    _write(_out(args, "report.json"), metrics.report_to_json(report))
    _write(_out(args, "report.csv"), report.to_csv(args.method))
    curves = {k: list(zip(v["recall"], v["precision"])) for k, v in report.pr_curves.items()}
    _write(_out(args, "pr_curves.svg"), svg.line_plot(curves, "precision-recall"))
    print(json.dumps({"sap_m": report.sap_m, "jap_m": report.jap_m}))
    return EXIT_OK


def cmd_stats(args) -> int:
    seqs = ann.load_manifest(_require_file(args.manifest))
    if args.axis == "label":
        annots = [ann.load_annotation(p) for s in seqs for p in s.annotations]
        table = ann.label_stats(annots)
    else:
        data = [ann.load_sequence_data(s) for s in seqs]
        edges = _floats(args.edges) if args.edges else None
        table = ann.bin_sequences(data, args.axis, edges, args.ceiling)
    _write(_out(args, f"stats_{args.axis}.csv"), table.to_csv())
    _write(_out(args, f"stats_{args.axis}.svg"), svg.bar_chart(table.counts(), f"sequences by {args.axis}"))
    doc = {"axis": args.axis, "rows": [r._asdict() for r in table.rows], "assignments": table.assignments}
    _write(_out(args, f"stats_{args.axis}.json"), json.dumps(doc, indent=2))
    print(table.to_csv(), end="")
    return EXIT_OK


def cmd_convert(args) -> int:
    stream = read_events(_require_file(args.input), args.width, args.height)
    out = args.output if os.path.isabs(args.output) or os.sep in args.output else _out(args, args.output)
    save_events(stream, out)
    print(json.dumps({"events": len(stream), "format": guess_format(out), "output": out}))
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--workers", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out-dir", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="evlayout", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=default_workers())
    p.add_argument("--out-dir", default="out")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def events_opts(sp):
        sp.add_argument("--events", required=True)
        sp.add_argument("--width", type=int, default=1280, help="geometry for CSV input")
        sp.add_argument("--height", type=int, default=720, help="geometry for CSV input")
        sp.add_argument("--t0", type=int, default=None, help="window start (us); default first event")
        sp.add_argument("--dt", type=int, default=10_000, help="window length (us)")

    sp = sub.add_parser("simulate", parents=[common], help="synthesise events + ground truth")
    sp.add_argument("--scene", required=True)
    sp.add_argument("--motion", required=True)
    sp.add_argument("--contrast", type=float, default=0.2)
    sp.add_argument("--step-us", type=int, default=10)
    sp.add_argument("--refractory-us", type=int, default=0)
    sp.add_argument("--noise-rate", type=float, default=0.0)
    sp.add_argument("--lux", type=int, default=250)
    sp.add_argument("--max-omega", type=float, default=simulator.MAX_HEAD_OMEGA)
    sp.add_argument("--gt-every-us", type=int, default=10_000)
    sp.add_argument("--format", choices=["binary", "csv"], default="binary")
    sp.add_argument("--sequence-id", default="sim0")
    sp.add_argument("--mode", choices=ann.MODES, default="handheld")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("repr", parents=[common], help="dense event representation")
    events_opts(sp)
    sp.add_argument("--kind", choices=sorted(representations.REPRESENTATIONS), default="voxel")
    sp.add_argument("--bins", type=int, default=representations.DEFAULT_BINS)
    sp.set_defaults(func=cmd_repr)

    sp = sub.add_parser("etdf", parents=[common], help="ETDF map(s)")
    events_opts(sp)
    sp.add_argument("--windows", type=_floats, default=None, help="comma list of window lengths in ms")
    sp.add_argument("--patch-size", type=int, choices=etdf_mod.PATCH_SIZES, default=16)
    sp.add_argument("--bin-width", type=int, default=etdf_mod.DEFAULT_BIN_WIDTH)
    sp.add_argument("--eps", type=float, default=etdf_mod.DEFAULT_EPS)
    sp.add_argument("--symmetric", action="store_true")
    sp.add_argument("--anchor", default=None, help="x,y anchor pixel for a same-edge mask")
    sp.add_argument("--tau", type=float, default=1.0, help="same-edge KL threshold (nats)")
    sp.set_defaults(func=cmd_etdf)

    sp = sub.add_parser("fuse-demo", parents=[common], help="fuse an ETDF map into attention")
    sp.add_argument("--etdf", required=True)
    sp.add_argument("--tokens", default=None)
    sp.add_argument("--d-model", type=int, default=8)
    sp.add_argument("--d-head", type=int, default=None)
    sp.add_argument("--w", type=float, default=1.0)
    sp.add_argument("--tau-f", type=float, default=1.0)
    sp.add_argument("--phi", choices=sffm.PHI_KINDS, default="exp")
    sp.set_defaults(func=cmd_fuse_demo)

    sp = sub.add_parser("eval", parents=[common], help="sAP / jAP report")
    sp.add_argument("--detections", required=True)
    sp.add_argument("--ground-truth", required=True)
    sp.add_argument("--native", default=None, help="W,H of input coordinates; rescales to 64x64")
    sp.add_argument("--method", default="evlayout")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("stats", parents=[common], help="dataset statistics")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--axis", choices=["label", "lux", "angular_speed", "linear_speed", "junction_count"],
                    default="label")
    sp.add_argument("--edges", default=None)
    sp.add_argument("--ceiling", type=float, default=None)
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("convert", parents=[common], help="convert event files (binary <-> csv)")
    sp.add_argument("--input", required=True)
    sp.add_argument("--output", required=True)
    sp.add_argument("--width", type=int, default=1280)
    sp.add_argument("--height", type=int, default=720)
    sp.set_defaults(func=cmd_convert)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc.args[0]}", file=sys.stderr)
        return EXIT_INPUT
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
