"""Command-line driver: ``comds <command> ...``.

Commands
--------
simulate   write a simulated dataset and its labels or intrinsic coordinates
embed      PCA or classical MDS of a data CSV (to produce input views)
distances  pairwise Euclidean distance CSV for each embedding CSV
fit        consensus (``comds``) or local consensus (``locomds``) fit
tune       grid search of the local fit's (tau, percentile)
eval       structure-preservation metrics of an embedding
plot       static SVG scatter of an embedding

Exit status is 0 on success, 1 for usage errors, 2 for unreadable or
inconsistent data and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from html import escape

import numpy as np

from . import __version__
from .baselines import pca_embed, torgerson_mds
from .core import ConsensusError, DistanceMatrix, NumericalError, SolverSettings, stress_per_point, stress_per_view
from .distances import pairwise_distances
from .io import (
    read_any,
    read_embedding,
    read_labels,
    write_distance,
    write_embedding,
    write_json,
    write_labels,
    atomic_write,
    table_text,
)
from .metrics import lcmc_curve, mantel_statistic, random_triplet_accuracy, spearman_distance_correlation
from .simulate import gen_gaussian_mixture, gen_swiss_roll
from .solver import fit as solver_fit
from .tuning import DEFAULT_PERCENTILES, DEFAULT_TAUS, TuningGrid, locomds, tune

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
METRICS = ("triplet", "spearman", "lcmc", "mantel")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


# ---------------------------------------------------------------- ingestion

def _load_views(paths):
    """Read embedding or distance CSVs sharing sample ids; rows follow the first file."""
    loaded = [(p, *read_any(p)) for p in paths]
    counts = {p: len(ids) for p, ids, _, _ in loaded}
    if len(set(counts.values())) > 1:
        listing = ", ".join(f"{p} has {c} rows" for p, c in counts.items())
        raise ConsensusError(f"row counts differ: {listing}")
    ids0 = loaded[0][1]
    views = []
    for p, ids, kind, values in loaded:
        if ids != ids0:
            if sorted(ids) != sorted(ids0) or len(set(ids)) != len(ids):
                raise ConsensusError(f"sample ids of {p} do not match those of {loaded[0][0]}")
            pos = {k: i for i, k in enumerate(ids)}
            idx = [pos[k] for k in ids0]
            values = values[np.ix_(idx, idx)] if kind == "distance" else values[idx]
        views.append(DistanceMatrix(values) if kind == "distance" else pairwise_distances(values))
    return ids0, views


def _load_reference(path, ids):
    ref_ids, kind, values = read_any(path)
    if len(ref_ids) != len(ids):
        raise ConsensusError(f"row counts differ: {path} has {len(ref_ids)} rows, embedding has {len(ids)}")
    if ref_ids != list(ids):
        pos = {k: i for i, k in enumerate(ref_ids)}
        missing = [k for k in ids if k not in pos]
        if missing:
            raise ConsensusError(f"{path}: no row for id {missing[0]!r}")
        idx = [pos[k] for k in ids]
        values = values[np.ix_(idx, idx)] if kind == "distance" else values[idx]
    return DistanceMatrix(values) if kind == "distance" else values


def _settings(args) -> SolverSettings:
    return SolverSettings(ndim=args.ndim, eps=args.eps, itmax=args.itmax, init=args.init, seed=args.seed)


def _fit_report(fit, views, settings, extra):
    local = fit.local
    report = {
        "version": __version__,
        "method": fit.method,
        "n": int(fit.configuration.shape[0]),
        "n_views": len(views),
        "settings": dataclasses.asdict(settings),
        "stress": fit.stress,
        "stress_trace": [float(s) for s in fit.stress_trace],
        "stress_per_view": [float(s) for s in stress_per_view(fit, views)],
        "stress_per_point": [float(s) for s in stress_per_point(fit, views)],
        "weights": fit.weights.tolist(),
        "t": None if local is None else list(local.t),
        "tau": None if local is None else local.tau,
        "percentile": None if local is None else local.percentile,
        "converged": bool(fit.converged),
        "iterations": int(fit.iterations),
        "warnings": list(fit.warnings),
    }
    report.update(extra)
    return report


def _write_fit(prefix, ids, fit, views, settings, extra):
    write_embedding(f"{prefix}.csv", ids, fit.configuration)
    write_json(f"{prefix}.json", _fit_report(fit, views, settings, extra))


# ---------------------------------------------------------------- commands

def cmd_simulate(args):
    if args.dataset == "gaussian":
        data, second = gen_gaussian_mixture(args.seed)
        name = "labels"
    else:
        data, second = gen_swiss_roll(args.seed, n=args.n, noise=args.noise)
        name = "intrinsic"
    ids = [f"s{i}" for i in range(len(data))]
    write_embedding(f"{args.output}_data.csv", ids, data, prefix="x")
    if name == "labels":
        write_labels(f"{args.output}_labels.csv", ids, [str(int(x)) for x in second])
    else:
        atomic_write(f"{args.output}_intrinsic.csv", table_text(["id", "t", "u"], ids, second))
    print(f"{args.output}_data.csv")
    print(f"{args.output}_{name}.csv")


def cmd_embed(args):
    ids, kind, values = read_any(args.input)
    if args.method == "pca":
        if kind == "distance":
            raise UsageError("pca needs a data CSV, not a distance matrix")
        z = pca_embed(values, args.ndim)
    else:
        d = values if kind == "distance" else pairwise_distances(values).values
        z = torgerson_mds(d, args.ndim)
    write_embedding(args.output, ids, z)


def cmd_distances(args):
    if args.output and len(args.inputs) > 1:
        raise UsageError("--output takes a single input; use --out-dir for several")
    for path in args.inputs:
        ids, values = read_embedding(path)
        d = pairwise_distances(values)
        if args.output:
            out = args.output
        else:
            stem = os.path.splitext(os.path.basename(path))[0]
            out = os.path.join(args.out_dir or os.path.dirname(path) or ".", f"{stem}_dist.csv")
        write_distance(out, ids, d)
        print(out)


def cmd_fit(args):
    ids, views = _load_views(args.inputs)
    settings = _settings(args)
    extra = {"inputs": list(args.inputs)}
    if args.method == "comds":
        fit = solver_fit(views, settings)
    else:
        fit = locomds(views, args.tau, args.percentile, settings)
    _write_fit(args.output, ids, fit, views, settings, extra)
    print(f"{args.output}.csv")


def _finite_or_none(a):
    return [[[float(v) if np.isfinite(v) else None for v in row] for row in plane] for plane in a]


def cmd_tune(args):
    ids, views = _load_views(args.inputs)
    reference = _load_reference(args.reference, ids)
    settings = _settings(args)
    grid = TuningGrid(tuple(args.taus), tuple(args.percentiles), tuple(args.k_values or ()))
    result, fits = tune(views, reference, grid, settings, truncate=args.truncate,
                        n_jobs=args.jobs, return_fits=True)
    if result.selected not in fits:
        raise NumericalError("every grid cell failed to fit")
    tau, pct = result.selected
    report = {
        "version": __version__,
        "taus": list(result.grid.taus),
        "percentiles": list(result.grid.percentiles),
        "k_values": [int(k) for k in result.grid.k_values],
        "scores": _finite_or_none(result.scores),
        "votes": result.votes.astype(int).tolist(),
        "selected": {"tau": tau, "percentile": pct},
        "k_used": [int(k) for k in result.k_used],
        "failures": [{"tau": k[0], "percentile": k[1], "error": v} for k, v in sorted(result.failures.items())],
        "truncate": bool(args.truncate),
    }
    write_json(f"{args.output}_tuning.json", report)
    _write_fit(args.output, ids, fits[result.selected], views, settings,
               {"inputs": list(args.inputs), "reference": args.reference})
    print(f"{args.output}_tuning.json")


def cmd_eval(args):
    ids, z = read_embedding(args.embedding)
    reference = _load_reference(args.reference, ids)
    wanted = args.metrics or list(METRICS)
    unknown = [m for m in wanted if m not in METRICS]
    if unknown:
        raise UsageError(f"unknown metric {unknown[0]!r}; choose from {', '.join(METRICS)}")
    out = {"version": __version__, "n": len(ids), "seed": args.seed}
    if "triplet" in wanted:
        out["triplet"] = random_triplet_accuracy(reference, z, args.triplets_per_anchor, seed=args.seed)
    if "spearman" in wanted:
        out["spearman"] = spearman_distance_correlation(reference, z)
    if "lcmc" in wanted:
        ks = args.k_values or list(range(2, 21, 3))
        ks = [k for k in ks if k < len(ids)]
        curve = lcmc_curve(reference, z, ks)
        out["lcmc"] = {"k": [int(k) for k, _ in curve], "score": [float(s) for _, s in curve],
                       "mean": float(np.mean([s for _, s in curve])) if curve else None}
    if "mantel" in wanted:
        dref = reference if isinstance(reference, DistanceMatrix) else pairwise_distances(reference)
        r, p = mantel_statistic(dref, pairwise_distances(z), args.permutations, seed=args.seed)
        out["mantel"] = {"r": r, "p_value": p, "permutations": args.permutations}
    if args.output:
        write_json(args.output, out)
    else:
        print(json.dumps(out, indent=2, sort_keys=True))


PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _label_key(s):
    try:
        return (0, float(s), s)
    except ValueError:
        return (1, 0.0, s)


def svg_scatter(xy, labels=None, size=600, margin=40, title=""):
    """Deterministic SVG text of a 2-D scatter, equal aspect."""
    xy = np.asarray(xy, dtype=float)
    lo, hi = xy.min(axis=0), xy.max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-12))
    inner = size - 2 * margin
    mid = (lo + hi) / 2
    px = margin + inner / 2 + (xy[:, 0] - mid[0]) / span * inner
    py = margin + inner / 2 - (xy[:, 1] - mid[1]) / span * inner
    cats = sorted(set(labels), key=_label_key) if labels is not None else []
    color = {c: PALETTE[i % len(PALETTE)] for i, c in enumerate(cats)}
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'viewBox="0 0 {size} {size}">',
             f'<rect width="{size}" height="{size}" fill="white"/>']
    if title:
        lines.append(f'<text x="{size / 2:.1f}" y="{margin / 2:.1f}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="14">{escape(title)}</text>')
    for i in range(len(xy)):
        fill = color.get(labels[i], "#444444") if labels is not None else "#444444"
        lines.append(f'<circle cx="{px[i]:.2f}" cy="{py[i]:.2f}" r="2.5" fill="{fill}" fill-opacity="0.8"/>')
    for j, c in enumerate(cats[:20]):
        y = margin + 14 * j
        lines.append(f'<circle cx="{size - margin - 60:.1f}" cy="{y:.1f}" r="4" fill="{color[c]}"/>')
        lines.append(f'<text x="{size - margin - 50:.1f}" y="{y + 4:.1f}" font-family="sans-serif" '
                     f'font-size="11">{escape(c)}</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def cmd_plot(args):
    ids, z = read_embedding(args.embedding)
    a, b = args.dims
    if not (1 <= a <= z.shape[1] and 1 <= b <= z.shape[1]):
        raise UsageError(f"--dims out of range for a {z.shape[1]}-column embedding")
    labels = None
    if args.labels:
        table = read_labels(args.labels)
        missing = [k for k in ids if k not in table]
        if missing:
            raise ConsensusError(f"{args.labels}: no label for id {missing[0]!r}")
        labels = [table[k] for k in ids]
    atomic_write(args.output, svg_scatter(z[:, [a - 1, b - 1]], labels, title=args.title))


# ---------------------------------------------------------------- parser

def _solver_flags(p):
    p.add_argument("--ndim", type=int, default=2, help="consensus dimension (default 2)")
    p.add_argument("--eps", type=float, default=1e-6, help="relative-change tolerance")
    p.add_argument("--itmax", type=int, default=300, help="maximum outer iterations")
    p.add_argument("--init", choices=("torgerson", "random"), default="torgerson")


def build_parser():
    parser = _Parser(prog="comds", description="Consensus MDS of several embeddings of one dataset.")
    parser.add_argument("--version", action="version", version=f"comds {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a simulated dataset")
    p.add_argument("--dataset", choices=("gaussian", "swissroll"), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=1000, help="swiss roll sample size")
    p.add_argument("--noise", type=float, default=0.1, help="swiss roll noise scale")
    p.add_argument("-o", "--output", required=True, help="output prefix")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("embed", help="PCA or classical MDS of a CSV")
    p.add_argument("input")
    p.add_argument("--method", choices=("pca", "mds"), required=True)
    p.add_argument("--ndim", type=int, default=2)
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; both methods are deterministic")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("distances", help="distance CSV for each embedding CSV")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--output", help="output path (single input only)")
    p.add_argument("--out-dir", help="directory for <stem>_dist.csv outputs")
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; distances are deterministic")
    p.set_defaults(func=cmd_distances)

    p = sub.add_parser("fit", help="consensus fit of embedding or distance CSVs")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--method", choices=("comds", "locomds"), default="comds")
    _solver_flags(p)
    p.add_argument("--tau", type=float, default=0.1, help="repulsion scale (locomds)")
    p.add_argument("--percentile", type=float, default=0.3, help="neighborhood percentile in (0, 1) (locomds)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True, help="output prefix for .csv and .json")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("tune", help="grid search of the local fit's tau and percentile")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--reference", required=True, help="original data or distance CSV")
    _solver_flags(p)
    p.add_argument("--taus", type=_float_list, default=list(DEFAULT_TAUS))
    p.add_argument("--percentiles", type=_float_list, default=list(DEFAULT_PERCENTILES))
    p.add_argument("--k-values", type=_int_list, default=None, help="neighborhood sizes to vote over")
    p.add_argument("--truncate", action="store_true", help="drop k past the first drop in the best score")
    p.add_argument("--jobs", type=int, default=None, help="worker threads (default COMDS_NUM_THREADS or 1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True, help="output prefix")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("eval", help="structure-preservation metrics")
    p.add_argument("embedding")
    p.add_argument("--reference", required=True, help="original data or distance CSV")
    p.add_argument("--metrics", type=lambda s: [x.strip() for x in s.split(",") if x.strip()],
                   default=None, help=f"comma-separated subset of {','.join(METRICS)}")
    p.add_argument("--triplets-per-anchor", type=int, default=20)
    p.add_argument("--k-values", type=_int_list, default=None, help="LCMC neighborhood sizes")
    p.add_argument("--permutations", type=int, default=0, help="Mantel permutations (0: no p-value)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", help="metrics JSON path (default stdout)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plot", help="SVG scatter of an embedding")
    p.add_argument("embedding")
    p.add_argument("--labels", help="CSV with columns id,label")
    p.add_argument("--dims", type=int, nargs=2, default=(1, 2), metavar=("A", "B"))
    p.add_argument("--title", default="")
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; plots are deterministic")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"comds {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"comds {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConsensusError, OSError) as exc:
        print(f"comds {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
