"""Command-line interface: ``exctop {simulate,analyze,predict,experiment,sweep}``.

Every subcommand writes its primary outputs first and ``manifest.json``
last; a run that fails leaves no manifest behind.
"""
from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__, closed_form, experiment, netpbm, topology
from .config import load_config
from .errors import ExctopError
from .excursion import digitize
from .synthesis import BOUNDARY_MODES, KINDS, CovarianceModel, sample_field, spectral_moment
from .window import Window, corner_count, euler, per_u, vol


def _dims(text: str) -> tuple[int, int]:
    """``"NYxNX"``, ``"NY,NX"`` or a single ``"N"`` for a square grid (rows x cols)."""
    parts = text.lower().replace(",", "x").split("x")
    try:
        vals = [int(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad dims {text!r}; use e.g. 256x256") from None
    if len(vals) == 1:
        vals *= 2
    if len(vals) != 2 or min(vals) < 1:
        raise argparse.ArgumentTypeError(f"bad dims {text!r}; use e.g. 256x256")
    return vals[0], vals[1]


def _quad(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        vals = ()
    if len(vals) != 4:
        raise argparse.ArgumentTypeError(f"bad rectangle {text!r}; use x0,x1,y0,y1")
    return vals


def _versions() -> dict:
    return {"exctop": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _write_manifest(out: Path, command: str, config: dict, seed, outputs: list[Path], started: float,
                    extra: dict | None = None) -> Path:
    manifest = {
        "tool": "exctop",
        "version": _versions(),
        "command": command,
        "config": config,
        "seed": seed,
        "outputs": sorted(p.name for p in outputs),
        "timing_s": round(time.perf_counter() - started, 3),
    }
    if extra:
        manifest.update(extra)
    path = out / "manifest.json"
    tmp = out / ".manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    os.replace(tmp, path)
    return path


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    stale = out / "manifest.json"
    if stale.exists():
        stale.unlink()
    return out


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    model = CovarianceModel(args.model, args.ell)
    fld = sample_field(model, args.dims, args.eps, args.seed, args.mode, stream=args.stream)
    img = digitize(fld, args.level)
    report = topology.analyze(img)
    out = _out_dir(args.out)
    paths = [out / "field.pgm", out / "field.pgm.json", out / "excursion.pbm", out / "report.json",
             out / "report.csv"]
    netpbm.write_pgm16(paths[0], fld)
    netpbm.write_pbm(paths[2], img, fmt=args.pbm_format.upper())
    paths[3].write_text(report.to_json())
    paths[4].write_text(report.csv_header() + "\n" + report.csv_row() + "\n")
    if args.csv:
        paths.append(out / "field.csv")
        netpbm.write_field_csv(paths[-1], fld)
    config = {"model": model.to_dict(), "dims": list(args.dims), "eps": args.eps, "lambda": args.level,
              "mode": args.mode, "stream": args.stream}
    _write_manifest(out, "simulate", config, args.seed, paths, started)
    return 0


def cmd_analyze(args) -> int:
    img = netpbm.read_pbm(args.image, eps=args.eps, boundary_mode=args.mode)
    report = topology.analyze(img)
    if args.out is None:
        sys.stdout.write(report.to_json())
        return 0
    started = time.perf_counter()
    out = _out_dir(args.out)
    paths = [out / "report.json", out / "report.csv"]
    paths[0].write_text(report.to_json())
    paths[1].write_text(report.csv_header() + "\n" + report.csv_row() + "\n")
    _write_manifest(out, "analyze", {"image": str(args.image), "eps": img.eps, "mode": img.boundary_mode},
                    None, paths, started)
    return 0


def predict(mu: float, levels, window: Window | None, phi: str = "cdf") -> dict:
    """Closed-form densities and window expectations under both volume normalizations."""
    rows = []
    for level in levels:
        row = {"lambda": level,
               "densities": {phi: closed_form.densities(mu, level, phi).to_dict()
                             for phi in closed_form.PHI_VARIANTS}}
        if window is not None:
            row["expected"] = {phi: closed_form.expected_functionals(window, mu, level, phi).to_dict()
                               for phi in closed_form.PHI_VARIANTS}
        rows.append(row)
    out = {"mu": mu, "primary_phi": phi, "levels": rows}
    if window is not None:
        out["window"] = {"rects": window.to_quads(), "vol": vol(window), "per_u1": per_u(window, 1),
                         "per_u2": per_u(window, 2), "euler": euler(window),
                         "corners": corner_count(window)}
    return out


def cmd_predict(args, parser) -> int:
    if args.mu is not None and (args.model or args.ell is not None):
        parser.error("give either --mu or --model/--ell, not both")
    if args.mu is None:
        if not args.model or args.ell is None:
            parser.error("need --mu, or both --model and --ell")
        mu = spectral_moment(CovarianceModel(args.model, args.ell), allow_irregular=args.allow_irregular)
    else:
        mu = args.mu
    window = Window.from_quads(args.window) if args.window else None
    text = json.dumps(predict(mu, args.levels, window, args.phi), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_experiment(args) -> int:
    started = time.perf_counter()
    cfg = load_config(args.config)
    if args.workers is not None:
        cfg.workers = args.workers
    if len(cfg.windows) >= 2:
        stats = experiment.window_term_experiment(cfg, phi=args.phi)
        kind = "window_term_experiment"
    else:
        stats = experiment.run(cfg, phi=args.phi)
        kind = "run"
    out = _out_dir(args.out)
    path = out / "summary.csv"
    path.write_text(stats.to_csv())
    extra = {"experiment": kind, "phi": args.phi, "config_sha256": cfg.digest(),
             "replicate_streams": [0, cfg.replicates - 1]}
    if stats.alternatives:
        extra["adjudication"] = stats.adjudication()
    _write_manifest(out, "experiment", cfg.to_dict(), cfg.seed, [path], started, extra)
    return 0


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    cfg = load_config(args.config)
    if args.workers is not None:
        cfg.workers = args.workers
    table = experiment.convergence_sweep(cfg)
    out = _out_dir(args.out)
    path = out / "sweep.csv"
    path.write_text(table.to_csv())
    extra = {"config_sha256": cfg.digest(), "replicate_streams": [0, cfg.replicates - 1],
             "checkerboard_resolution_slope": table.resolution_slope(),
             "checkerboard_decay_exponent": table.decay_exponent()}
    _write_manifest(out, "sweep", cfg.to_dict(), cfg.seed, [path], started, extra)
    return 0


def _phi_flags(p) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--cdf-phi", dest="phi", action="store_const", const="cdf",
                   help="volume term is the standard normal CDF (default)")
    g.add_argument("--centered-phi", dest="phi", action="store_const", const="centered",
                   help="volume term is the CDF minus 1/2, with the window Euler term scaled by 1/sqrt(2 pi)")
    g.add_argument("--paper-phi", dest="phi", action="store_const", const="centered", help=argparse.SUPPRESS)
    p.set_defaults(phi="cdf")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exctop", description="Topology of excursion sets of 2-D Gaussian fields: simulate, measure, predict.")
    parser.add_argument("--version", action="version", version=f"exctop {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample a field, digitize one excursion, report its topology")
    p.add_argument("--model", required=True, help=f"one of {', '.join(KINDS)}")
    p.add_argument("--ell", type=float, required=True, help="length scale (world units)")
    p.add_argument("--dims", type=_dims, required=True, help="grid size, rows x cols, e.g. 256x256")
    p.add_argument("--eps", type=float, required=True, help="lattice spacing")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--stream", type=int, default=0, help="replicate stream of the seed (default 0)")
    p.add_argument("--lambda", dest="level", type=float, required=True, help="excursion level")
    p.add_argument("--mode", choices=BOUNDARY_MODES, default="torus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--pbm-format", choices=("p1", "p4", "P1", "P4"), default="P4")
    p.add_argument("--csv", action="store_true", help="also write the raw field as CSV")

    p = sub.add_parser("analyze", help="topology report of a PBM image")
    p.add_argument("image")
    p.add_argument("--eps", type=float, default=None, help="override the lattice spacing")
    p.add_argument("--mode", choices=BOUNDARY_MODES, default=None, help="override the boundary mode")
    p.add_argument("--out", default=None, help="output directory (default: JSON on stdout)")

    p = sub.add_parser("predict", help="closed-form Gaussian densities and window expectations")
    p.add_argument("--mu", type=float, default=None, help="second spectral moment")
    p.add_argument("--model", default=None)
    p.add_argument("--ell", type=float, default=None)
    p.add_argument("--allow-irregular", action="store_true", help="accept matern-3/2")
    p.add_argument("--lambda", dest="levels", type=float, nargs="+", required=True)
    p.add_argument("--window", type=_quad, action="append", help="rectangle x0,x1,y0,y1 (repeatable)")
    p.add_argument("--out", default=None, help="output JSON path (default: stdout)")
    _phi_flags(p)
    p.set_defaults(subparser=p)

    for name, helptext in (("experiment", "Monte Carlo run from a config file"),
                           ("sweep", "resolution sweep from a config file")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--workers", type=int, default=None)
    _phi_flags(sub.choices["experiment"])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"simulate": cmd_simulate, "analyze": cmd_analyze, "experiment": cmd_experiment,
                "sweep": cmd_sweep}
    try:
        if args.command == "predict":
            return cmd_predict(args, args.subparser)
        return handlers[args.command](args)
    except (ExctopError, ValueError, OSError) as exc:
        print(f"exctop {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
