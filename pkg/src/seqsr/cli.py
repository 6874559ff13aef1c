"""Command line interface: ``seqsr {synth,degrade,superres,metrics,gradcheck,kalman-check}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import io, metrics
from .core import ConfigError
from .io import FormatError

log = logging.getLogger("seqsr")

__all__ = ["main", "build_parser"]


def _parse_crop(text: str):
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from exc
    if w <= 0 or h <= 0:
        raise argparse.ArgumentTypeError("crop size must be positive")
    return w, h


def _parse_set(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value
    return key.strip(), parsed


def _global_flags(parser: argparse.ArgumentParser, suppress: bool):
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", metavar="PATH", default=default(None),
                        help="flat JSON file of solver settings")
    parser.add_argument("--set", metavar="KEY=VALUE", type=_parse_set, action="append", default=default([]),
                        help="override one solver setting (repeatable)")
    parser.add_argument("--seed", type=int, default=default(0), help="random seed")
    parser.add_argument("--threads", type=int, default=default(None),
                        help="cap BLAS/OpenMP threads (1 gives bit-exact reruns)")
    parser.add_argument("--crop", type=_parse_crop, metavar="WxH", default=default(None),
                        help="score only the central WxH window")
    parser.add_argument("-v", "--verbose", action="store_true", default=default(False))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seqsr", description=__doc__)
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a textured sequence with analytic motion")
    p.add_argument("out_dir", type=Path)
    p.add_argument("--size", type=_parse_crop, default=(64, 64), metavar="WxH")
    p.add_argument("--frames", type=int, default=9, help="number of frames T+1")
    motion = p.add_mutually_exclusive_group()
    motion.add_argument("--translate", type=float, nargs=2, metavar=("VX", "VY"), default=None)
    motion.add_argument("--rotate", type=float, metavar="OMEGA", default=None, help="radians per frame")
    p.add_argument("--cutoff", type=float, default=0.15, help="texture bandwidth (cycles per pixel)")

    p = sub.add_parser("degrade", parents=[common], help="blur, decimate and add noise")
    p.add_argument("frames", nargs="+", type=Path)
    p.add_argument("-o", "--out-dir", type=Path, required=True)
    p.add_argument("--noise", type=float, default=0.0, help="observation noise std (gray levels)")

    p = sub.add_parser("superres", parents=[common], help="reconstruct HR frames and motion")
    p.add_argument("frames", nargs="+", type=Path)
    p.add_argument("-o", "--out-dir", type=Path, required=True)
    p.add_argument("--init-motion", nargs="+", type=Path, default=None, help="T initial .flo fields")
    p.add_argument("--truth-motion", nargs="+", type=Path, default=None, help="T .flo fields for the trace")
    p.add_argument("--truth", nargs="+", type=Path, default=None, help="HR ground truth for the report")
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("metrics", parents=[common], help="score frames and motion")
    p.add_argument("--truth", nargs="+", type=Path, required=True)
    p.add_argument("--estimate", nargs="+", type=Path, required=True)
    p.add_argument("--truth-motion", nargs="+", type=Path, default=None)
    p.add_argument("--estimate-motion", nargs="+", type=Path, default=None)
    p.add_argument("-o", "--report", type=Path, default=None, help="TSV report path")

    p = sub.add_parser("gradcheck", parents=[common], help="operator, gradient and prox self-checks")
    p.add_argument("--inject-fault", default=None, help=argparse.SUPPRESS)

    sub.add_parser("kalman-check", parents=[common], help="compare the smoother with the adjoint route")
    return parser


def _config(args):
    return io.load_config(args.config, dict(args.set or []))


def _frame_name(prefix: str, t: int, ext: str) -> str:
    return f"{prefix}_{t:03d}.{ext}"


def _write_frames(out_dir: Path, prefix: str, frames) -> list:
    paths = []
    for t, frame in enumerate(frames):
        path = out_dir / _frame_name(prefix, t, "pgm" if np.ndim(frame) == 2 else "ppm")
        io.write_pnm(path, frame)
        paths.append(path)
    return paths


def _write_motion(out_dir: Path, prefix: str, d) -> list:
    paths = []
    for t in range(len(d)):
        path = out_dir / _frame_name(prefix, t + 1, "flo")
        io.write_flo(path, d[t])
        paths.append(path)
    return paths


def _read_motion(paths) -> np.ndarray:
    return np.stack([io.read_flo(p) for p in paths])


def _manifest(args, cfg, inputs, outputs, phases, extra=None) -> dict:
    out = {
        "command": args.command,
        "argv": args.argv,
        "config": cfg.to_dict() if cfg is not None else None,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "seed": args.seed,
        "threads": args.threads,
        "build": io.git_describe(),
        "wall_clock_s": phases,
    }
    out.update(extra or {})
    return out


def cmd_synth(args) -> int:
    from .synthetic import make_synthetic

    t0 = time.perf_counter()
    w, h = args.size
    if args.frames < 1:
        raise ValueError("--frames must be >= 1")
    motion = ("rotate", args.rotate) if args.rotate is not None else ("translate", *(args.translate or (0.5, 0.0)))
    frames, d = make_synthetic((h, w), args.frames - 1, motion, seed=args.seed, cutoff=args.cutoff)
    outputs = _write_frames(args.out_dir, "hr", frames) + _write_motion(args.out_dir, "motion", d)
    io.write_manifest(args.out_dir / "manifest.json",
                      _manifest(args, None, [], outputs, {"synth": time.perf_counter() - t0},
                                {"motion": list(motion), "cutoff": args.cutoff}))
    print(f"wrote {len(frames)} frames and {len(d)} motion fields to {args.out_dir}")
    return 0


def cmd_degrade(args) -> int:
    from .operators import ObservationOp
    from .synthetic import degrade

    cfg = _config(args)
    t0 = time.perf_counter()
    frames = io.read_frames(args.frames)
    if frames.shape[-1] % 2 or frames.shape[-2] % 2:
        raise ValueError(f"frame dimensions must be even, got {frames.shape[-1]}x{frames.shape[-2]}")
    y = degrade(frames, args.noise, seed=args.seed, op=ObservationOp.from_config(cfg))
    outputs = _write_frames(args.out_dir, "lr", y)
    io.write_manifest(args.out_dir / "manifest.json",
                      _manifest(args, cfg, args.frames, outputs, {"degrade": time.perf_counter() - t0},
                                {"noise": args.noise}))
    print(f"wrote {len(outputs)} low-resolution frames to {args.out_dir}")
    return 0


def cmd_superres(args) -> int:
    from .outer import lanczos_upscale, super_resolve

    cfg = _config(args)
    phases = {}
    t0 = time.perf_counter()
    y = io.read_frames(args.frames)
    T = y.shape[0] - 1
    d_init = d_true = None
    if args.init_motion:
        d_init = _read_motion(args.init_motion)
    if args.truth_motion:
        d_true = _read_motion(args.truth_motion)
    for name, d in (("--init-motion", d_init), ("--truth-motion", d_true)):
        if d is not None and d.shape[0] != T:
            raise ValueError(f"{name} needs {T} fields for {T + 1} frames, got {d.shape[0]}")
    phases["read"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    res = super_resolve(y, cfg, d_init=d_init, d_true=d_true)
    phases["solve"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    out = args.out_dir
    outputs = _write_frames(out, "hr", res.x)
    outputs += _write_motion(out, "motion", res.d)
    for t in range(T):
        eps = res.eps[t]
        if eps.ndim == 2:
            outputs.append(out / _frame_name("eps", t + 1, "pfm"))
            io.write_pfm(outputs[-1], eps)
        else:
            for ch, plane in enumerate(eps):
                outputs.append(out / f"eps_{t + 1:03d}_c{ch}.pfm")
                io.write_pfm(outputs[-1], plane)
    rows = list(res.trace.rows())
    io.write_tsv(out / "trace.tsv", rows, ["iter", "J", "alpha", "trials", "B", "mepe"])
    outputs.append(out / "trace.tsv")

    report = {"J0": res.trace.J0, "J_final": res.trace.J[-1] if res.trace.J else res.trace.J0}
    if args.truth:
        truth = io.read_frames(args.truth)
        lz = lanczos_upscale(y)
        window = (lambda a: metrics.crop(a, *args.crop)) if args.crop else (lambda a: a)
        report["psnr_superres"] = float(np.mean(metrics.psnr_sequence(window(truth), window(res.x),
                                                                      cfg.psnr_standard)))
        report["psnr_lanczos"] = float(np.mean(metrics.psnr_sequence(window(truth), window(lz),
                                                                     cfg.psnr_standard)))
    if d_true is not None and T > 0:
        report["mepe"] = metrics.mepe(d_true, res.d)
    io.write_tsv(out / "report.tsv", [{"metric": k, "value": float(v)} for k, v in report.items()])
    outputs.append(out / "report.tsv")

    if not args.no_plots:
        from . import plotting

        if rows:
            outputs.append(plotting.plot_trace(res.trace, out / "trace.png"))
        panels = {"lanczos": res.x_init, "estimate": res.x}
        if args.truth:
            panels = {"truth": truth, **panels}
        outputs.append(plotting.plot_frames(panels, out / "frames.png"))
        if T > 0:
            outputs.append(plotting.plot_motion(res.d, out / "motion.png"))
    phases["write"] = time.perf_counter() - t0
    io.write_manifest(out / "manifest.json", _manifest(args, cfg, args.frames, outputs, phases,
                                                       {"report": report}))
    for k, v in report.items():
        print(f"{k}\t{v:.6g}")
    return 0


def cmd_metrics(args) -> int:
    cfg = _config(args)
    truth, est = io.read_frames(args.truth), io.read_frames(args.estimate)
    if truth.shape != est.shape:
        raise ValueError(f"truth {truth.shape} and estimate {est.shape} differ in shape")
    if args.crop:
        truth, est = metrics.crop(truth, *args.crop), metrics.crop(est, *args.crop)
    per_frame = metrics.psnr_sequence(truth, est, cfg.psnr_standard)
    rows = [{"metric": "psnr_mean", "value": float(np.mean(per_frame))},
            {"metric": "cc_mean", "value": float(np.mean([metrics.cc(a, b) for a, b in zip(truth, est)]))}]
    rows += [{"metric": f"psnr_{t:03d}", "value": float(v)} for t, v in enumerate(per_frame)]
    if args.truth_motion or args.estimate_motion:
        if not (args.truth_motion and args.estimate_motion):
            raise ValueError("--truth-motion and --estimate-motion must be given together")
        dt, de = _read_motion(args.truth_motion), _read_motion(args.estimate_motion)
        if args.crop:
            dt, de = metrics.crop(dt, *args.crop), metrics.crop(de, *args.crop)
        rows += [{"metric": "mepe", "value": metrics.mepe(dt, de)},
                 {"metric": "mbae", "value": metrics.mbae(dt, de)}]
    for r in rows:
        print(f"{r['metric']}\t{r['value']:.6f}")
    if args.report:
        io.write_tsv(args.report, rows, ["metric", "value"])
    return 0


def _report_checks(results) -> int:
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def cmd_gradcheck(args) -> int:
    from .oracles import run_gradcheck

    cfg = _config(args) if (args.config or args.set) else None
    return _report_checks(run_gradcheck(seed=args.seed, cfg=cfg, fault=args.inject_fault))


def cmd_kalman_check(args) -> int:
    from .oracles import run_kalman_check

    cfg = _config(args) if (args.config or args.set) else None
    return _report_checks(run_kalman_check(seed=args.seed, cfg=cfg))


COMMANDS = {
    "synth": cmd_synth,
    "degrade": cmd_degrade,
    "superres": cmd_superres,
    "metrics": cmd_metrics,
    "gradcheck": cmd_gradcheck,
    "kalman-check": cmd_kalman_check,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None:
        if args.threads < 1:
            print("seqsr: error: --threads must be >= 1", file=sys.stderr)
            return 2
        os.environ["OMP_NUM_THREADS"] = str(args.threads)
    try:
        with threadpool_limits(limits=args.threads):
            return COMMANDS[args.command](args)
    except (ConfigError, FormatError, ValueError, OSError) as exc:
        print(f"seqsr: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
