"""Command-line entry point.

Commands:
  decompose        full three-step run: candidate structures, selection by
                   bi-cross-validation, final fit
  fit              fit a fixed structure directly
  simulate         seeded replications of a synthetic-data experiment
  count-structures number of distinct structures for given d and r

Every run writes a manifest echoing the effective configuration so it can be
reproduced exactly. Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict

from . import __version__
from .errors import SlideError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slide", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--grid-length", type=int, default=50)
        p.add_argument("--grid-min", type=float, default=0.01)
        p.add_argument("--kr", type=int, default=3, help="row folds")
        p.add_argument("--kc", type=int, default=3, help="column folds per view")
        p.add_argument("--eps-pmf", type=float, default=1e-6)
        p.add_argument("--eps-fit", type=float, default=1e-6)
        p.add_argument("--max-iter", type=int, default=1000)
        p.add_argument("--restarts", type=int, default=1)
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (falls back to SLIDE_SEED, then 0)")
        p.add_argument("--threads", type=int, default=1, help="worker cap")

    dec = sub.add_parser("decompose", help="candidate search, selection, and fit")
    dec.add_argument("--views", action="append", required=True, metavar="CSV",
                     help="one CSV per view (repeat the flag)")
    dec.add_argument("--structure", default=None,
                     help='fixed structure such as "11,10"; skips selection')
    add_common(dec)

    fit_p = sub.add_parser("fit", help="fit a fixed structure")
    fit_p.add_argument("--views", action="append", required=True, metavar="CSV")
    fit_p.add_argument("--structure", required=True)
    add_common(fit_p)

    sim = sub.add_parser("simulate", help="run a synthetic experiment")
    from .simulate import generator_names

    sim.add_argument("--generator", required=True, choices=generator_names())
    sim.add_argument("--reps", type=int, default=100)
    add_common(sim)

    cnt = sub.add_parser("count-structures", help="count distinct structures")
    cnt.add_argument("-d", type=int, required=True, help="number of views")
    cnt.add_argument("-r", type=int, required=True, help="maximum components")
    return parser


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("SLIDE_SEED")
    return int(env) if env else 0


def _write(outdir: str, name: str, text: str) -> None:
    with open(os.path.join(outdir, name), "w") as fh:
        fh.write(text)


def _manifest(args, seed: int) -> str:
    doc = {k: v for k, v in sorted(vars(args).items()) if k != "seed"}
    doc["seed"] = seed
    doc["version"] = __version__
    return json.dumps(doc, indent=2)


def _summary_text(selected, report, var) -> str:
    lines = [f"selected structure: {selected.encode() or '(empty)'}"]
    lines.append(f"total rank: {selected.r}")
    for b, k in sorted(selected.rank_by_pattern.items(), reverse=True):
        lines.append(f"  pattern {''.join(map(str, b))}: rank {k}")
    if report is not None:
        lines.append(f"candidates scored: {len(report.structures)}")
        lines.append(f"selected total error: {report.total_errors[report.selected]!r}")
    lines.append("variance explained:")
    for name, rank, frac in zip(var.view_names, var.view_ranks, var.view_fractions):
        lines.append(f"  {name}: rank {rank}, fraction {frac:.4f}")
    lines.append(f"  overall: rank {var.total_rank}, fraction {var.total_fraction:.4f}")
    return "\n".join(lines) + "\n"


def cmd_decompose(args) -> int:
    from .bcv import select_structure
    from .fit import fit_with_structure, variance_explained
    from .pmf import extract_candidates, make_grid
    from .preprocess import center_and_scale, load_views
    from .structure import StructureMatrix

    seed = _resolve_seed(args)
    if args.command == "decompose" and len(args.views) < 2:
        print("decompose needs at least two views", file=sys.stderr)
        return 2
    os.makedirs(args.out, exist_ok=True)
    raw = load_views(args.views)
    data = center_and_scale(raw)
    _write(args.out, "manifest.json", _manifest(args, seed))

    report = None
    if args.structure is not None:
        selected = StructureMatrix.from_string(args.structure, d=raw.d)
    else:
        grid = make_grid(data, length=args.grid_length, min_lambda=args.grid_min)
        candidates = extract_candidates(
            data, grid, eps=args.eps_pmf, max_iter=args.max_iter,
            restarts=args.restarts, seed=seed,
        )
        _write(args.out, "candidates.json", json.dumps({
            "structures": [s.encode() for s in candidates.structures],
            "generating_lambda": candidates.generating_lambda,
        }))
        report = select_structure(
            raw, candidates, k_r=args.kr, k_c=args.kc, seed=seed,
            eps=args.eps_fit, max_iter=args.max_iter, workers=args.threads,
        )
        _write(args.out, "bcv_report.json", report.to_json())
        selected = report.selected_structure

    model = fit_with_structure(data, selected, eps=args.eps_fit, max_iter=args.max_iter)
    var = variance_explained(model, data)
    _write(args.out, "model.json", model.to_json())
    _write(args.out, "variance.json", json.dumps(asdict(var)))
    _write(args.out, "summary.txt", _summary_text(model.structure, report, var))
    return 0


def cmd_simulate(args) -> int:
    from .simulate import ExperimentConfig, run_experiment

    seed = _resolve_seed(args)
    os.makedirs(args.out, exist_ok=True)
    config = ExperimentConfig(
        generator=args.generator,
        replications=args.reps,
        seed=seed,
        k_r=args.kr,
        k_c=args.kc,
        grid_length=args.grid_length,
        grid_min=args.grid_min,
        eps_pmf=args.eps_pmf,
        eps_fit=args.eps_fit,
        max_iter=args.max_iter,
        restarts=args.restarts,
        workers=args.threads,
    )
    _write(args.out, "manifest.json", _manifest(args, seed))
    result = run_experiment(config)
    _write(args.out, "result.json", result.to_json())
    rows = result.csv_rows()
    with open(os.path.join(args.out, "replications.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    with open(os.path.join(args.out, "summary.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        agg = result.aggregates
        writer.writerow(["replications", agg["replications"]])
        writer.writerow(["truth_match_count", agg["truth_match_count"]])
        for name in ("loss_slide", "loss_slide_best", "loss_onestep"):
            for stat, value in agg[name].items():
                writer.writerow([f"{name}_{stat}", repr(value)])
        for enc, count in agg["selection_counts"].items():
            writer.writerow([f"selected[{enc or '(empty)'}]", count])
    return 0


def cmd_count(args) -> int:
    from .structure import count_structures

    print(count_structures(args.d, args.r))
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command in ("decompose", "fit"):
            return cmd_decompose(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        return cmd_count(args)
    except SlideError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
