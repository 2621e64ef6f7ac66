"""Command-line entry point.

Subcommands: ``phantom`` (synthetic benchmark generation), ``donors``
(donor-selection reports), ``adapt`` (write adapted volumes), ``evaluate``
(score a source-target pair under one of the pipeline arms), and
``beta-search`` (grid search with curve reports and figures).

Every command writes a ``manifest.json`` capturing the resolved
configuration, SHA-256 digests of all inputs, the output file names and the
wall time. Reruns with identical inputs and flags reproduce every output
byte for byte; only the manifest's wall_time field varies.

Exit codes: 0 success, 2 invalid arguments or values, 3 I/O failure,
4 shape incompatibility.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .betasearch import (DEFAULT_BETA_GRID, averaged_optimal, grid_search,
                         optimal_per_pair, validate_grid)
from .donors import random_assignment, select_donors
from .errors import KswapError, ShapeMismatchError, VolumeError
from .metrics import SurfaceDiceParams, dice, surface_dice
from .parallel import ordered_map, resolve_workers
from .phantom import (DEFAULT_SHAPE, SEVERITIES, benchmark_manifest,
                      generate_benchmark)
from .predict import BaselineSegmenter, PrecomputedPredictor
from .report import (save_beta_curves_png, save_scores_png, sha256_file,
                     write_csv, write_json)
from .srsim import DEFAULT_PARAMS
from .transfer import TransferConfig, fda_swap, multi_source_transfer, naive_predict
from .volume import (Volume, binarize_probability, load_collection,
                     load_volume, save_volume)

logger = logging.getLogger(__name__)

MODES = ("none", "naive", "swap-single", "mst", "srsim-mst")


def _parse_shape(text: str) -> tuple[int, int, int]:
    parts = tuple(int(x) for x in text.split(","))
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"shape needs 3 comma-separated ints, got '{text}'")
    return parts


def _parse_grid(text: str) -> list[float]:
    try:
        return validate_grid(float(x) for x in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _make_predictor(spec: str):
    if spec == "baseline":
        return BaselineSegmenter()
    if spec.startswith("precomputed:"):
        return PrecomputedPredictor(load_volume(spec.split(":", 1)[1]))
    raise ValueError(f"unknown predictor '{spec}' (expected baseline or precomputed:<path>)")


def _input_digests(paths) -> dict[str, str]:
    return {str(p): sha256_file(p) for p in sorted(set(Path(q) for q in paths))}


def _dir_inputs(directory) -> list[Path]:
    return [p for p in sorted(Path(directory).iterdir()) if p.is_file()]


def _write_manifest(out_dir: Path, command: str, args, inputs, outputs, started: float) -> None:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    for key, value in config.items():
        if isinstance(value, Path):
            config[key] = str(value)
    write_json(out_dir / "manifest.json", {
        "schema": 1,
        "command": command,
        "config": config,
        "inputs": _input_digests(inputs),
        "outputs": sorted(str(o) for o in outputs),
        "wall_time_s": time.perf_counter() - started,
    })


def cmd_phantom(args) -> int:
    started = time.perf_counter()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    severities = list(SEVERITIES) if args.severity == "all" else [args.severity]
    outputs = []
    tiers = []
    for severity in severities:
        collections = generate_benchmark(args.domains, args.scans, severity,
                                         args.seed, args.shape)
        tiers.append(benchmark_manifest(args.domains, args.scans, severity,
                                        args.seed, args.shape))
        for collection in collections:
            domain_dir = out_dir / collection.domain
            for scan, mask in zip(collection.scans, collection.masks):
                save_volume(scan, domain_dir / f"{scan.id}.vol")
                save_volume(mask, domain_dir / f"{scan.id}_mask.vol")
                outputs += [f"{collection.domain}/{scan.id}.vol",
                            f"{collection.domain}/{scan.id}_mask.vol"]
    write_json(out_dir / "benchmark.json", {
        "schema": 1,
        "seed": args.seed,
        "shape": list(args.shape),
        "n_domains": args.domains,
        "scans_per_domain": args.scans,
        "tiers": tiers,
    })
    outputs.append("benchmark.json")
    _write_manifest(out_dir, "phantom", args, [], outputs, started)
    print(f"wrote {len(outputs)} files to {out_dir}")
    return 0


def cmd_donors(args) -> int:
    started = time.perf_counter()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    target = load_volume(args.target)
    sources = load_collection(args.sources)
    assignment = select_donors(target, sources, args.strategy, args.n, args.m)
    report = {"schema": 1, "target": target.id, "source_domain": sources.domain}
    report.update(assignment.to_report())
    write_json(out_dir / "donors.json", report)
    inputs = [args.target, str(args.target) + ".hdr"] + _dir_inputs(args.sources)
    _write_manifest(out_dir, "donors", args, inputs, ["donors.json"], started)
    print(f"wrote donor report for '{target.id}' ({args.strategy}) to {out_dir}")
    return 0


def cmd_adapt(args) -> int:
    started = time.perf_counter()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    target = load_volume(args.target)
    sources = load_collection(args.sources)
    assignment = select_donors(target, sources, args.strategy, args.n_mst, args.m)
    by_id = {s.id: s for s in sources.scans}
    n_ranks = min(len(refs) for refs in assignment.per_slice)

    outputs = ["donors.json"]
    mean_acc = np.zeros(target.shape, dtype=np.float64)
    rank_planes = [np.empty(target.shape, dtype=np.float64) for _ in range(n_ranks)]
    for i, refs in enumerate(assignment.per_slice):
        for r, ref in enumerate(refs):
            adapted = fda_swap(by_id[ref.scan_id].data[ref.slice_index],
                               target.data[i], args.beta)
            mean_acc[i] += adapted
            if r < n_ranks:
                rank_planes[r][i] = adapted
        mean_acc[i] /= len(refs)
    for r, planes in enumerate(rank_planes):
        vol = Volume(data=planes.astype(np.float32), spacing=target.spacing,
                     id=f"{target.id}_adapted_r{r}", domain=sources.domain, kind="intensity")
        save_volume(vol, out_dir / f"adapted_r{r}.vol")
        outputs.append(f"adapted_r{r}.vol")
    mean_vol = Volume(data=mean_acc.astype(np.float32), spacing=target.spacing,
                      id=f"{target.id}_adapted_mean", domain=sources.domain, kind="intensity")
    save_volume(mean_vol, out_dir / "adapted_mean.vol")
    outputs.append("adapted_mean.vol")

    report = {"schema": 1, "target": target.id, "source_domain": sources.domain,
              "beta": args.beta}
    report.update(assignment.to_report())
    write_json(out_dir / "donors.json", report)
    inputs = [args.target, str(args.target) + ".hdr"] + _dir_inputs(args.sources)
    _write_manifest(out_dir, "adapt", args, inputs, outputs, started)
    print(f"adapted '{target.id}' with {n_ranks} donor rank(s) at beta={args.beta}")
    return 0


def _evaluate_scan(scan, gt, sources, args, cfg, predictor, scan_index):
    tolerance = SurfaceDiceParams(tolerance=args.tolerance)
    if args.mode in ("none", "naive"):
        prob = naive_predict(scan, predictor)
    else:
        if args.mode == "srsim-mst":
            assignment = select_donors(scan, sources, args.strategy, cfg.n_mst, args.m)
        else:
            n = 1 if args.mode == "swap-single" else cfg.n_mst
            window = args.m if args.strategy == "2.5d" else 0
            rng = np.random.Generator(np.random.PCG64(
                np.random.SeedSequence([args.seed, scan_index])))
            assignment = random_assignment(scan, sources, n, rng, window)
        prob = multi_source_transfer(scan, sources, assignment, cfg, predictor)
    pred = binarize_probability(prob, cfg.binarize_threshold)
    return {
        "id": scan.id,
        "surface_dice": surface_dice(pred, gt, tolerance),
        "dice": dice(pred, gt),
    }


def cmd_evaluate(args) -> int:
    started = time.perf_counter()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    sources = load_collection(args.sources)
    targets = load_collection(args.targets)
    if targets.masks is None:
        raise VolumeError(f"target collection '{targets.domain}' has no *_mask.vol ground truth")
    predictor = _make_predictor(args.predictor)
    cfg = TransferConfig(beta=args.beta, n_mst=args.n_mst,
                         binarize_threshold=args.binarize_threshold)
    workers = resolve_workers(args.workers)
    jobs = list(zip(targets.scans, targets.masks, range(len(targets.scans))))
    per_scan = ordered_map(
        lambda job: _evaluate_scan(job[0], job[1], sources, args, cfg, predictor, job[2]),
        jobs, workers)

    report = {
        "schema": 1,
        "pair": [sources.domain, targets.domain],
        "mode": args.mode,
        "strategy": args.strategy,
        "beta": args.beta,
        "n_mst": args.n_mst,
        "m": args.m,
        "seed": args.seed,
        "predictor": args.predictor,
        "tolerance": args.tolerance,
        "surface_dice": sum(r["surface_dice"] for r in per_scan) / len(per_scan),
        "dice": sum(r["dice"] for r in per_scan) / len(per_scan),
        "per_scan": per_scan,
    }
    write_json(out_dir / "report.json", report)
    write_csv(out_dir / "scores.csv", ["scan_id", "surface_dice", "dice"],
              [[r["id"], r["surface_dice"], r["dice"]] for r in per_scan])
    save_scores_png(per_scan, out_dir / "scores.png",
                    title=f"{sources.domain} → {targets.domain} [{args.mode}]")
    inputs = _dir_inputs(args.sources) + _dir_inputs(args.targets)
    if args.predictor.startswith("precomputed:"):
        store = args.predictor.split(":", 1)[1]
        inputs += [store, store + ".hdr"]
    _write_manifest(out_dir, "evaluate", args,
                    inputs, ["report.json", "scores.csv", "scores.png"], started)
    print(f"{args.mode}: surface_dice={report['surface_dice']:.4f} dice={report['dice']:.4f}")
    return 0


def cmd_beta_search(args) -> int:
    started = time.perf_counter()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    predictor = _make_predictor(args.predictor)
    cfg = TransferConfig(beta=0.0, n_mst=args.n_mst,
                         binarize_threshold=args.binarize_threshold)
    pairs = [(load_collection(src), load_collection(tgt)) for src, tgt in args.pair]
    workers = resolve_workers(args.workers)

    def run_one(pair):
        failures: list = []
        curves = grid_search([pair], args.grid, args.strategy, cfg, predictor,
                             DEFAULT_PARAMS, args.m,
                             SurfaceDiceParams(tolerance=args.tolerance), failures)
        return curves, failures

    results = ordered_map(run_one, pairs, workers)
    curves = [c for cs, _ in results for c in cs]
    failures = [f for _, fs in results for f in fs]
    if not curves:
        logger.error("every pair failed: %s", failures)
        raise ShapeMismatchError(f"no pair could be searched ({len(failures)} failure(s))")

    per_pair = optimal_per_pair(curves)
    report = {
        "schema": 1,
        "grid": list(args.grid),
        "strategy": args.strategy,
        "n_mst": args.n_mst,
        "m": args.m,
        "curves": [
            {"pair": list(c.pair_id),
             "points": [{"beta": b, "score": s} for b, s in c.points]}
            for c in curves
        ],
        "optimal_per_pair": {f"{s}:{t}": b for (s, t), b in per_pair.items()},
        "averaged_optimal": averaged_optimal(curves),
        "failures": failures,
    }
    write_json(out_dir / "beta_report.json", report)
    write_csv(out_dir / "beta_curves.csv", ["source", "target", "beta", "score"],
              [[c.pair_id[0], c.pair_id[1], b, s] for c in curves for b, s in c.points])
    save_beta_curves_png(curves, out_dir / "beta_curves.png")
    inputs = [p for src, tgt in args.pair for d in (src, tgt) for p in _dir_inputs(d)]
    _write_manifest(out_dir, "beta-search", args, inputs,
                    ["beta_report.json", "beta_curves.csv", "beta_curves.png"], started)
    print(f"averaged optimal beta: {report['averaged_optimal']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kswap",
        description="Training-free k-space style adaptation toolkit for volumetric scans.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_donors=True):
        p.add_argument("--workers", type=int, default=None,
                       help="worker pool size (default: KSWAP_WORKERS env or CPU count)")
        if with_donors:
            p.add_argument("--strategy", choices=("3d", "2d", "2.5d"), default="3d",
                           help="donor search scheme (default: 3d, method default)")
            p.add_argument("--n-mst", dest="n_mst", type=int, default=7,
                           help="donors averaged per slice (default: 7, method default)")
            p.add_argument("--m", type=int, default=2,
                           help="2.5d half-window in slices (default: 2, method default)")

    p = sub.add_parser("phantom", help="generate a synthetic multi-domain benchmark")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--severity", choices=SEVERITIES + ("all",), default="all",
                   help="domain-shift tier to generate (default: all)")
    p.add_argument("--domains", type=int, default=2,
                   help="domains per tier (default: 2, tool default)")
    p.add_argument("--scans", type=int, default=4,
                   help="scans per domain (default: 4, tool default)")
    p.add_argument("--seed", type=int, default=42, help="benchmark seed (default: 42)")
    p.add_argument("--shape", type=_parse_shape, default=DEFAULT_SHAPE,
                   help="scan shape slices,rows,cols (default: 8,96,96, tool default)")
    p.add_argument("--workers", type=int, default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("donors", help="report donor selection for one target scan")
    p.add_argument("--target", required=True, help="target .vol path")
    p.add_argument("--sources", required=True, help="source collection directory")
    p.add_argument("--n", type=int, default=7,
                   help="donors per slice (default: 7, method default)")
    p.add_argument("--out", required=True, help="output directory")
    common(p)
    p.set_defaults(func=cmd_donors)

    p = sub.add_parser("adapt", help="write style-adapted copies of a target scan")
    p.add_argument("--target", required=True, help="target .vol path")
    p.add_argument("--sources", required=True, help="source collection directory")
    p.add_argument("--beta", type=float, required=True,
                   help="low-frequency swap fraction in [0, 1] (0.03 is the method's exhibit)")
    p.add_argument("--out", required=True, help="output directory")
    common(p)
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("evaluate", help="score one source-target pair under a pipeline arm")
    p.add_argument("--sources", required=True, help="source collection directory")
    p.add_argument("--targets", required=True, help="target collection directory (needs masks)")
    p.add_argument("--predictor", default="baseline",
                   help="baseline or precomputed:<path> (default: baseline)")
    p.add_argument("--mode", choices=MODES, default="srsim-mst",
                   help="pipeline arm; 'none' is an alias of 'naive', the single random "
                        "swap arm is named 'swap-single' (default: srsim-mst)")
    p.add_argument("--beta", type=float, default=0.03,
                   help="swap fraction (default: 0.03, method default)")
    p.add_argument("--seed", type=int, default=42,
                   help="seed for the random-donor arms (default: 42)")
    p.add_argument("--binarize-threshold", type=float, default=0.5,
                   help="probability cut for mask output (default: 0.5, tool default)")
    p.add_argument("--tolerance", type=float, default=1.0,
                   help="surface-dice tolerance in voxels (default: 1.0, tool default)")
    p.add_argument("--out", required=True, help="output directory")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("beta-search", help="grid-search beta over source-target pairs")
    p.add_argument("--pair", nargs=2, action="append", metavar=("SRC_DIR", "TGT_DIR"),
                   required=True, help="source/target collection dirs; repeatable")
    p.add_argument("--grid", type=_parse_grid, default=list(DEFAULT_BETA_GRID),
                   help="comma-separated betas (default: 0.01,0.02,0.03,0.05,0.07,0.10; "
                        "brackets the method's exhibited 0.03)")
    p.add_argument("--predictor", default="baseline",
                   help="baseline or precomputed:<path> (default: baseline)")
    p.add_argument("--binarize-threshold", type=float, default=0.5,
                   help="probability cut for mask output (default: 0.5, tool default)")
    p.add_argument("--tolerance", type=float, default=1.0,
                   help="surface-dice tolerance in voxels (default: 1.0, tool default)")
    p.add_argument("--out", required=True, help="output directory")
    common(p)
    p.set_defaults(func=cmd_beta_search)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ShapeMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (VolumeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (KswapError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
