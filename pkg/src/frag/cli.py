"""Command-line interface: ``frag <subcommand> ...``.

Subcommands: run, simulate, spectrum, filter, group, metrics, validate.

Options may also come from a plain-text ``--config`` file of ``key=value``
lines, where keys are option names with ``_`` or ``-``; flags on the command
line win. Usage errors exit with status 2, data errors with status 1 and a
JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import metrics
from .apf import DEFAULT_SIGMA, apply_filter, build_filter
from .enhance import apply_groupwise, make_operator
from .grouping import (SchedulerConfig, as_ranges, build_merge_tree, cut_tree,
                       frag_step, is_valid_partition, schedule_cut_rank)
from .simulate import PATTERNS, TrajectorySpec, default_steps, synth_trajectory
from .spectral import (differential_spectrum, forward_spectrum, max_radius,
                       radial_profile, spatial_moments)
from .tensor_io import (atomic_write_bytes, ingest_frames, read_latents, read_netpbm,
                        write_latents)

FORMAT_VERSION = 1
STEP_FILE = re.compile(r"^z_t(\d+)\.frag$")


class CommandError(Exception):
    def __init__(self, message: str, code: str = "error"):
        super().__init__(message)
        self.code = code


def _json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _score(value: float):
    return "inf" if math.isinf(value) else value


def _emit(text: str, output: str | None) -> None:
    if output:
        atomic_write_bytes(output, text.encode())
    else:
        sys.stdout.write(text)


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def threads() -> int:
    raw = os.environ.get("FRAG_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise CommandError(f"FRAG_THREADS must be an integer, got {raw!r}", "config")
    if n < 1:
        raise CommandError("FRAG_THREADS must be >= 1", "config")
    return n


# -- run ---------------------------------------------------------------------

def step_files(directory: Path) -> dict[int, Path]:
    found = {}
    for path in directory.iterdir():
        m = STEP_FILE.match(path.name)
        if m:
            found[int(m.group(1))] = path
    return found


def load_run_input(directory: Path, steps: list[int] | None, T: int):
    """Return ``[(t, latents), ...]`` in descending ``t`` order."""
    if not directory.is_dir():
        raise CommandError(f"{directory} is not a directory", "input")
    files = step_files(directory)
    if files:
        chosen = sorted(files, reverse=True) if steps is None else list(steps)
        missing = [t for t in chosen if t not in files]
        if missing:
            raise CommandError(f"no tensor file for steps {missing}", "input")
        return [(t, read_latents(files[t])) for t in chosen]
    latents = ingest_frames(directory)
    t = steps[0] if steps else T - 1
    return [(t, latents)]


def schedule_document(records, shape, config: dict) -> dict:
    steps = []
    for rec in records:
        steps.append({
            "t": rec.t,
            "radius": rec.radius,
            "moment": None if rec.moment is None else [rec.moment.mx, rec.moment.my],
            "n_cut": rec.n_cut,
            "groups": as_ranges(rec.groups),
        })
    frames, height, width, _ = shape
    return {"version": FORMAT_VERSION, "frames": frames, "width": width, "height": height,
            "config": config, "steps": steps}


def cmd_run(args) -> int:
    cfg = SchedulerConfig(T=args.T, min_group=args.min_group, d0=args.d0,
                          sigma=args.sigma, contiguous=args.contiguous)
    inputs = load_run_input(Path(args.input), args.steps, cfg.T)
    ts = [t for t, _ in inputs]
    if any(a <= b for a, b in zip(ts, ts[1:])):
        raise CommandError("steps must be strictly descending", "input")
    shape = inputs[0][1].shape
    if any(z.shape != shape for _, z in inputs):
        raise CommandError("step tensors differ in shape", "input")
    op = None if args.operator == "none" else make_operator(args.operator, args.beta)

    def spectrum_of(k):
        return forward_spectrum(inputs[k][1])

    with ThreadPoolExecutor(max_workers=threads()) as pool:
        spectra = list(pool.map(spectrum_of, range(len(inputs))))

        def step(k):
            t, z = inputs[k]
            prev = spectra[k - 1] if k > 0 else None
            return frag_step(z, None, t, cfg, spectrum=spectra[k], prev_spectrum=prev)

        records = list(pool.map(step, range(len(inputs))))

    if op is not None and args.enhanced_dir:
        out_dir = Path(args.enhanced_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for (t, z), rec in zip(inputs, records):
            write_latents(apply_groupwise(op, rec.groups, z), out_dir / f"z_t{t}.frag")

    config = {
        "input": str(args.input),
        "T": cfg.T,
        "sigma": cfg.sigma,
        "d0": cfg.d0,
        "min_group": cfg.min_group,
        "contiguous": cfg.contiguous,
        "operator": args.operator,
        "beta": args.beta,
    }
    _emit(_json(schedule_document(records, shape, config)), args.schedule)
    return 0


# -- simulate ----------------------------------------------------------------

def cmd_simulate(args) -> int:
    steps = args.steps or default_steps(args.T, args.n_steps, args.stride)
    spec = TrajectorySpec(pattern=args.pattern, L=args.frames, W=args.width, H=args.height,
                          C=args.channels, steps=tuple(steps), T=args.T, r_min=args.r_min,
                          r_max=args.r_max, exponent=args.exponent, eta_max=args.eta_max,
                          eta_decay=args.eta_decay, seed=args.seed)
    traj = synth_trajectory(spec)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for (t, z), r in zip(traj, traj.planted):
        name = f"z_t{t}.frag"
        write_latents(z, out / name)
        records.append({"t": t, "file": name, "planted_radius": r,
                        "noise_level": spec.noise_level(t)})
    doc = {"version": FORMAT_VERSION, "spec": spec.to_dict(), "seed": spec.seed,
           "steps": records}
    atomic_write_bytes(out / "trajectory.json", _json(doc).encode())
    return 0


# -- spectrum ----------------------------------------------------------------

def cmd_spectrum(args) -> int:
    z = read_latents(args.input)
    spectrum = forward_spectrum(z)
    if args.prev:
        prev = forward_spectrum(read_latents(args.prev))
        m = spatial_moments(differential_spectrum(spectrum, prev))
        _emit(_json({"version": FORMAT_VERSION, "moment": [m.mx, m.my], "distance": m.d}),
              args.output)
        return 0
    profile = radial_profile(spectrum, args.bins)
    if args.format == "csv":
        lines = ["bin_center_f,mean_magnitude"]
        lines += [f"{c!r},{v!r}" for c, v in zip(profile.centers.tolist(),
                                                  profile.mean_magnitude.tolist())]
        _emit("\n".join(lines) + "\n", args.output)
    else:
        _emit(_json({"version": FORMAT_VERSION,
                     "bin_center_f": profile.centers.tolist(),
                     "mean_magnitude": profile.mean_magnitude.tolist()}), args.output)
    return 0


# -- filter ------------------------------------------------------------------

def cmd_filter(args) -> int:
    z = read_latents(args.input) if args.input else None
    if z is not None:
        height, width = z.shape[1:3]
    elif args.width and args.height:
        width, height = args.width, args.height
    else:
        raise CommandError("give --input or both --width and --height", "usage")
    filt = build_filter(args.r, args.sigma, width, height)
    if args.export_heatmap:
        filt.export_heatmap(args.export_heatmap)
    if z is not None and args.output:
        write_latents(apply_filter(filt, z), args.output)
    sys.stdout.write(_json({"version": FORMAT_VERSION, "r": filt.r, "sigma": filt.sigma,
                            "width": width, "height": height}))
    return 0


# -- group -------------------------------------------------------------------

def cmd_group(args) -> int:
    h = read_latents(args.input)
    tree = build_merge_tree(h, args.contiguous)
    if args.n_cut is not None:
        n_cut = args.n_cut
    elif args.t is not None:
        n_cut = schedule_cut_rank(args.t, tree.n_root, args.T)
    else:
        raise CommandError("give --t or --n-cut", "usage")
    groups = cut_tree(tree, n_cut, args.min_group)
    doc = {
        "version": FORMAT_VERSION,
        "n_cut": n_cut,
        "contiguous": args.contiguous,
        "merges": [{"rank": m.rank, "left": list(m.left), "right": list(m.right),
                    "linkage": m.linkage, "height": m.height} for m in tree.merges],
    }
    if args.contiguous:
        doc["groups"] = as_ranges(groups)
    else:
        doc["members"] = [list(g) for g in groups]
    _emit(_json(doc), args.output)
    return 0


# -- metrics -----------------------------------------------------------------

def _load_mask(args, height, width):
    if args.mask:
        img = read_netpbm(args.mask)
        if img.shape[2] != 1:
            raise CommandError("mask must be a PGM", "input")
        return img[:, :, 0] > 0
    if args.rect:
        top, left, bottom, right = args.rect
        return metrics.rect_mask(height, width, top, left, bottom, right)
    raise CommandError("masked-psnr needs --mask or --rect", "usage")


def cmd_metrics(args) -> int:
    a = read_latents(args.a)
    doc = {"version": FORMAT_VERSION, "metric": args.metric}
    if args.metric == "consistency":
        doc["value"] = metrics.frame_consistency(a)
        doc["proxy"] = True
    else:
        if not args.b:
            raise CommandError(f"{args.metric} needs two inputs", "usage")
        b = read_latents(args.b)
        doc["proxy"] = False
        if args.metric == "psnr":
            doc["value"] = _score(metrics.psnr(a, b))
        elif args.metric == "ssim":
            doc["value"] = metrics.ssim(a, b)
        elif args.metric == "masked-psnr":
            doc["value"] = _score(metrics.masked_psnr(a, b, _load_mask(args, *a.shape[1:3])))
        else:
            scores = metrics.band_psnr(a, b, args.f_cut)
            doc["value"] = {"low": _score(scores.low), "high": _score(scores.high)}
            doc["f_cut"] = args.f_cut
    _emit(_json(doc), args.output)
    return 0


# -- validate ----------------------------------------------------------------

def schedule_problems(doc) -> list[str]:
    """Structural problems in a schedule document; empty when valid."""
    problems = []
    if not isinstance(doc, dict):
        return ["document is not an object"]
    if doc.get("version") != FORMAT_VERSION:
        problems.append(f"version must be {FORMAT_VERSION}")
    frames = doc.get("frames")
    if not isinstance(frames, int) or frames < 1:
        return problems + ["frames must be a positive integer"]
    width, height = doc.get("width"), doc.get("height")
    if not (isinstance(width, int) and isinstance(height, int) and width > 0 and height > 0):
        return problems + ["width and height must be positive integers"]
    r_limit = max_radius(height, width)
    config = doc.get("config") or {}
    min_group = config.get("min_group", 1)
    T = config.get("T", 1000)
    steps = doc.get("steps")
    if not isinstance(steps, list) or not steps:
        return problems + ["steps must be a non-empty list"]
    previous = None
    for k, step in enumerate(steps):
        where = f"steps[{k}]"
        try:
            t = step["t"]
            radius = step["radius"]
            n_cut = step["n_cut"]
            ranges = step["groups"]
            moment = step["moment"]
        except (KeyError, TypeError):
            problems.append(f"{where}: missing field")
            continue
        if not isinstance(t, int) or not 0 <= t <= T - 1:
            problems.append(f"{where}: t={t} outside [0, {T - 1}]")
        elif previous is not None and t >= previous:
            problems.append(f"{where}: t={t} not below previous step {previous}")
        previous = t if isinstance(t, int) else previous
        if not isinstance(n_cut, int) or not 1 <= n_cut <= max(frames - 1, 1):
            problems.append(f"{where}: n_cut={n_cut} outside [1, {frames - 1}]")
        if not isinstance(radius, (int, float)) or not 0 < radius < r_limit:
            problems.append(f"{where}: radius={radius} outside (0, {r_limit:.6g})")
        if moment is not None and (not isinstance(moment, list) or len(moment) != 2):
            problems.append(f"{where}: moment must be null or [M_x, M_y]")
        try:
            groups = tuple(tuple(range(a, b + 1)) for a, b in ranges)
        except (TypeError, ValueError):
            problems.append(f"{where}: groups must be [first, last] pairs")
            continue
        if any(len(g) == 0 for g in groups) or list(groups) != sorted(groups):
            problems.append(f"{where}: groups must be ordered, non-empty ranges")
        elif not is_valid_partition(groups, frames, min(min_group, frames)):
            problems.append(f"{where}: groups do not partition {frames} frames "
                            f"into ranges of size >= {min_group}")
    return problems


def cmd_validate(args) -> int:
    try:
        doc = json.loads(Path(args.schedule).read_text())
    except json.JSONDecodeError as exc:
        raise CommandError(f"not valid JSON: {exc}", "input")
    problems = schedule_problems(doc)
    sys.stdout.write(_json({"version": FORMAT_VERSION, "valid": not problems,
                            "problems": problems}))
    return 0 if not problems else 1


# -- parser ------------------------------------------------------------------

def _add_scheduler_opts(p):
    p.add_argument("--T", type=int, default=1000, help="maximum diffusion step")
    p.add_argument("--min-group", type=int, default=2, help="minimum temporal group size")
    p.add_argument("--no-contiguous", dest="contiguous", action="store_false",
                   help="allow non-adjacent frames to cluster (ablation)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="frag", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key=value file of option defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="compute the temporal-group schedule for a trajectory")
    p.add_argument("input", help="directory of z_t<step>.frag files or PGM/PPM frames")
    p.add_argument("--schedule", help="output JSON path (default: stdout)")
    p.add_argument("--steps", type=_int_list, help="comma-separated descending steps")
    p.add_argument("--sigma", type=float, default=DEFAULT_SIGMA)
    p.add_argument("--d0", type=float, default=6.0)
    p.add_argument("--operator", choices=("none", "identity", "mean", "pivot"), default="none")
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--enhanced-dir", help="write group-wise enhanced tensors here")
    _add_scheduler_opts(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("simulate", help="write a synthetic denoising trajectory")
    p.add_argument("output", help="output directory")
    p.add_argument("--pattern", choices=PATTERNS, default="texture")
    p.add_argument("--frames", type=int, default=48)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--channels", type=int, default=4)
    p.add_argument("--T", type=int, default=1000)
    p.add_argument("--steps", type=_int_list)
    p.add_argument("--n-steps", type=int, default=50)
    p.add_argument("--stride", type=int, default=20)
    p.add_argument("--r-min", type=float, default=2.0)
    p.add_argument("--r-max", type=float, default=45.0)
    p.add_argument("--exponent", type=float, default=1.0)
    p.add_argument("--eta-max", type=float, default=1e-4)
    p.add_argument("--eta-decay", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("spectrum", help="radial profile, or moments against --prev")
    p.add_argument("input")
    p.add_argument("--prev", help="previous-step tensor; prints spatial moments instead")
    p.add_argument("--bins", type=int, default=16)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--output")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("filter", help="build and optionally apply the low-pass filter")
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--sigma", type=float, default=DEFAULT_SIGMA)
    p.add_argument("--input")
    p.add_argument("--output")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--export-heatmap", nargs="?", const="apf_heatmap.pgm", metavar="PGM")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("group", help="cluster frames and cut the merge tree")
    p.add_argument("input")
    p.add_argument("--t", type=int)
    p.add_argument("--n-cut", type=int)
    p.add_argument("--output")
    _add_scheduler_opts(p)
    p.set_defaults(func=cmd_group, min_group=1)

    p = sub.add_parser("metrics", help="quality metrics between tensor files")
    p.add_argument("metric", choices=("psnr", "band-psnr", "ssim", "masked-psnr", "consistency"))
    p.add_argument("a")
    p.add_argument("b", nargs="?")
    p.add_argument("--f-cut", type=float, default=0.25 * math.pi)
    p.add_argument("--mask", help="PGM mask, nonzero = evaluated")
    p.add_argument("--rect", type=_int_list, help="top,left,bottom,right of the zeroed area")
    p.add_argument("--output")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("validate", help="check a schedule document")
    p.add_argument("schedule")
    p.set_defaults(func=cmd_validate)
    return parser


def read_config_file(path) -> dict[str, str]:
    values = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CommandError(f"{path}:{n}: expected key=value", "config")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _apply_config(parser, argv, values: dict[str, str]):
    """Re-parse ``argv`` with file values installed as subcommand defaults."""
    args = parser.parse_args(argv)
    sub_action = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    subparser = sub_action.choices[args.command]
    defaults = {}
    for action in subparser._actions:
        if action.dest in values:
            raw = values[action.dest]
            if isinstance(action, argparse._StoreFalseAction):
                defaults[action.dest] = raw.lower() in ("1", "true", "yes", "on")
            elif action.type is not None:
                defaults[action.dest] = action.type(raw)
            else:
                defaults[action.dest] = raw
    unknown = set(values) - {a.dest for a in subparser._actions}
    if unknown:
        raise CommandError(f"unknown config keys for {args.command}: {sorted(unknown)}", "config")
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(argv)
        if args.config:
            args = _apply_config(parser, argv, read_config_file(args.config))
        return args.func(args)
    except CommandError as exc:
        if exc.code == "usage":
            parser.print_usage(sys.stderr)
            sys.stderr.write(f"frag: error: {exc}\n")
            return 2
        code, message = exc.code, str(exc)
    except (ValueError, OSError) as exc:
        code = getattr(exc, "code", type(exc).__name__)
        message = str(exc)
    sys.stderr.write(json.dumps({"version": FORMAT_VERSION, "error": code,
                                 "message": message}) + "\n")
    return 1


if __name__ == "__main__":
    sys.exit(main())
