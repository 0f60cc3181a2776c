"""Command-line entry point ``nlindex``.

Exit codes: 0 success, 2 invalid input or configuration, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .config import ExperimentConfig, load_config
from .fem import ParameterError
from .io import IngestError, fmt, read_embedding, read_samples
from .landscape import DegeneracyError, build_surface, lower_convex_hull, nonlinearity_index
from .lft1d import envelope_demo
from .pipeline import PipelineError, analyze_samples, run_experiment
from .problems import ConfigError, Problem
from .render import Markers, write_contour_svg, write_surface_svg

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("nlindex")


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    over = {}
    if args.seed is not None:
        over["rng_seed"] = args.seed
    if args.out is not None:
        over["output_dir"] = args.out
    if getattr(args, "starts", None) is not None:
        over["sampling.num_starts"] = args.starts
    if getattr(args, "no_freeze_gradient", False):
        over["sampling.freeze_gradient"] = False
    if getattr(args, "no_reference_group", False):
        over["sampling.include_reference_group"] = False
    if getattr(args, "eta_max_after_fix", None) is not None:
        over["sampling.eta_max_after_fix"] = args.eta_max_after_fix
    if getattr(args, "workers", None) is not None:
        over["sampling.workers"] = args.workers
    return cfg.with_overrides(**over) if over else cfg


def cmd_run(args) -> int:
    cfg = _config(args)
    report = run_experiment(cfg)
    print(f"I_NL = {report['I_NL']:.6f}  ({report['samples']['total']} samples) -> {cfg.output_dir}")
    return EXIT_OK


def cmd_index(args) -> int:
    cfg = _config(args)
    n = Problem(cfg.problem).n if args.config else None
    clip = args.clip_bound if args.clip_bound is not None else cfg.problem.objective.clip_bound
    samples = read_samples(args.samples, n_expected=n, rho_min=cfg.problem.rho_min, clip_bound=clip)
    report = analyze_samples(samples, cfg.output_dir, cfg.embedding, cfg.hull_resolution, cfg.bands)
    if samples.clamped:
        print(f"warning: {samples.clamped} density value(s) clamped", file=sys.stderr)
    print(f"I_NL = {report['I_NL']:.6f}  ({len(samples)} samples) -> {cfg.output_dir}")
    return EXIT_OK


def cmd_lft_demo(args) -> int:
    d = envelope_demo(n_samples=args.samples)
    cols = ["x", "phi", "biconj_hi", f"biconj_{args.samples}", "hull"]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in zip(*(d[c] for c in cols)):
            w.writerow([fmt(v) for v in row])
    print(f"sup-distance to reference: double LFT {d['sup_biconj']:.6f}, lower hull {d['sup_hull']:.6f}")
    return EXIT_OK


def cmd_render(args) -> int:
    run_dir = Path(args.run_dir)
    emb = read_embedding(run_dir / "embedding.csv")
    surface = build_surface(emb["coords"], emb["J"])
    envelope = lower_convex_hull(surface, args.resolution)
    nonlinearity_index(surface, envelope)
    coords = emb["coords"]
    best: dict[int, int] = {}
    for i, g in enumerate(emb["group_id"]):
        if g not in best or emb["J"][i] < emb["J"][best[g]]:
            best[g] = i
    ref = [best[g] for g in best if emb["reference"][best[g]]]
    bests = [i for i in best.values() if i not in ref]
    markers = Markers(coords[emb["is_start"]], coords[bests], coords[ref[0]] if ref else None)
    out = Path(args.out or run_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_surface_svg(surface, envelope, out / "surface.svg", markers, args.bands)
    write_contour_svg(surface, out / "contour.svg", markers, args.bands)
    print(f"rendered {out / 'surface.svg'} and {out / 'contour.svg'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nlindex", description="Landscape non-linearity index for TO problems.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="experiment config (JSON)")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")

    run = sub.add_parser("run", help="sample, embed and index one experiment")
    common(run)
    run.add_argument("--starts", type=int, help="number of fixed-gradient groups")
    run.add_argument("--no-freeze-gradient", action="store_true")
    run.add_argument("--no-reference-group", action="store_true")
    run.add_argument("--eta-max-after-fix", type=float)
    run.add_argument("--workers", type=int)
    run.set_defaults(func=cmd_run)

    idx = sub.add_parser("index", help="index an existing samples.csv")
    common(idx)
    idx.add_argument("--samples", required=True)
    idx.add_argument("--clip-bound", type=float)
    idx.set_defaults(func=cmd_index)

    lft = sub.add_parser("lft-demo", help="1D envelope comparison as CSV")
    lft.add_argument("--out", default="lft_demo.csv")
    lft.add_argument("--samples", type=int, default=50)
    lft.set_defaults(func=cmd_lft_demo)

    ren = sub.add_parser("render", help="re-render SVGs from a run directory")
    ren.add_argument("run_dir")
    ren.add_argument("--out")
    ren.add_argument("--bands", type=int, default=10)
    ren.add_argument("--resolution", type=int, default=20)
    ren.set_defaults(func=cmd_render)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, IngestError, ParameterError, DegeneracyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except PipelineError as exc:
        if isinstance(exc.cause, (ConfigError, ParameterError)):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
