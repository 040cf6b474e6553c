"""Command-line surface: reproducible batch workflows over the exchange
formats.

Exit codes: 0 on success (warnings go to stderr as notes), 1 on data
errors, 2 on usage errors. All randomness flows from --seed; omitting it
selects the fixed default so runs are deterministic by default.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings

import numpy as np

from . import analysis, figures, idx, perturb, report, thresholds
from .errors import SoftgateError
from .matrix import (
    infer_format,
    partition,
    read_matrix,
    synth_fixture,
    validate,
    write_matrix,
)

DEFAULT_SEED = 2718


def _emit(args, header: list[str], rows: list[list]) -> None:
    if getattr(args, "json", False):
        print(json.dumps({"columns": header, "rows": rows}, default=str))
    else:
        sys.stdout.write(report.csv_text(header, rows))


def _note(msg: str) -> None:
    print(f"note: {msg}", file=sys.stderr)


def _read(args, attr="input"):
    path = getattr(args, attr)
    fmt = args.format or infer_format(path)
    return read_matrix(path, fmt)


def _parse_level_args(pairs: list[str]):
    out = []
    for item in pairs:
        if "=" not in item:
            raise SoftgateError(f"--level expects LEVEL=PATH, got {item!r}")
        lv, path = item.split("=", 1)
        out.append((int(lv), path))
    return out


def _parse_int_list(text: str | None) -> list[int] | None:
    if text is None:
        return None
    return [int(v) for v in text.split(",") if v != ""]


def _parse_float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v != ""]


def _out_dir(args) -> str:
    return args.out_dir or os.environ.get("SOFTGATE_OUT_DIR") or "."


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------

def cmd_validate(args) -> int:
    m = _read(args)
    rep = validate(m, tol=args.tol)
    header = ["row", "message"]
    rows = [[v.row, v.message] for v in rep.violations]
    _emit(args, header, rows)
    if rep.ok:
        _note(f"{rep.n} rows ok at tol {rep.tol}")
        return 0
    _note(f"{len(rep.violations)} violation(s) in {rep.n} rows")
    return 1


def cmd_synth(args) -> int:
    m = synth_fixture(
        k=args.k,
        per_class_n=args.per_class_n,
        concentration=args.concentration,
        error_rate=args.error_rate,
        seed=args.seed,
    )
    fmt = args.format or infer_format(args.out)
    write_matrix(m, args.out, fmt)
    _note(f"wrote {m.n} rows to {args.out}")
    return 0


def cmd_calibrate(args) -> int:
    m = _read(args)
    rep = validate(m)
    if not rep.ok:
        for v in rep.violations[:20]:
            _note(f"row {v.row}: {v.message}")
        _note(f"matrix failed validation with {len(rep.violations)} violation(s)")
        return 1
    bundle = thresholds.calibrate(
        m,
        use_fitted=not args.initial_centroids,
        max_iter=args.max_iter,
        tol=args.tol,
        fallback=args.fallback,
    )
    thresholds.write_bundle(bundle, args.out)
    if bundle.thresholds.unbounded:
        _note(f"unbounded classes (no incorrect rows): {sorted(bundle.thresholds.unbounded)}")
    _note(f"wrote bundle to {args.out}")
    return 0


def cmd_gate(args) -> int:
    bundle = thresholds.read_bundle(args.bundle)
    header = ["row", "pred", "distance", "threshold", "verdict", "unbounded_class"]
    rows = []
    if not args.probs and not args.input:
        raise SoftgateError("gate needs --in or --probs")
    if args.probs:
        probs = np.array(_parse_float_list(args.probs))
        d = thresholds.gate(probs, bundle)
        rows.append([0, d.pred_label, d.distance, d.threshold_used, d.verdict,
                     int(d.unbounded_class)])
    else:
        m = _read(args)
        dist = thresholds.predicted_class_distances(m, bundle.centroids)
        for i in range(m.n):
            pred = int(m.pred_labels[i])
            t = float(bundle.thresholds.t[pred])
            verdict = thresholds.VERDICT_ACCEPT if dist[i] < t else thresholds.VERDICT_DEFER
            rows.append([i, pred, float(dist[i]), t, verdict,
                         int(pred in bundle.thresholds.unbounded)])
    _emit(args, header, rows)
    return 0


def cmd_overlap(args) -> int:
    m = _read(args)
    bundle = thresholds.read_bundle(args.bundle)
    correct = m.take(partition(m).correct)
    rows = thresholds.overlap_stats(correct, bundle)
    _emit(args, *report.overlap_table(rows))
    return 0


def cmd_sweep(args) -> int:
    m = _read(args)
    bundle = thresholds.read_bundle(args.bundle)
    factors = (
        _parse_float_list(args.factors)
        if args.factors
        else thresholds.DEFAULT_SWEEP_FACTORS
    )
    points = thresholds.threshold_sweep(m, bundle, factors)
    _emit(args, *report.sweep_table(points))
    return 0


def cmd_stats(args) -> int:
    m = _read(args)
    bundle = thresholds.read_bundle(args.bundle)
    stats = analysis.distance_stats(m, bundle.centroids, group_by=args.group_by)
    _emit(args, *report.stats_table(stats))
    return 0


def cmd_confusion(args) -> int:
    m = _read(args)
    _emit(args, *report.confusion_table(analysis.confusion_matrix(m)))
    return 0


def cmd_likelihood(args) -> int:
    bundle = thresholds.read_bundle(args.bundle)
    if args.kind == "aggregate":
        if not args.level:
            raise SoftgateError("aggregate needs --level LEVEL=PATH arguments")
        mats = []
        for lv, path in sorted(_parse_level_args(args.level)):
            m = read_matrix(path, args.format or infer_format(path))
            nd = analysis.nearest_distance_matrix(m, bundle.centroids)
            mats.append(analysis.misclassification_likelihood(nd))
        agg = analysis.aggregate_likelihoods(mats, args.consistency_threshold)
        _emit(args, *report.aggregate_table(agg))
        for rank, (y, c, v) in enumerate(agg.top_pairs, start=1):
            _note(f"top {rank}: true {y} misclassified as {c} (likelihood {v:.4f})")
        return 0
    if not args.input:
        raise SoftgateError(f"--kind {args.kind} needs --in")
    m = _read(args)
    nd = analysis.nearest_distance_matrix(m, bundle.centroids)
    if args.kind == "D":
        _emit(args, *report.nearest_table(nd))
    else:
        L = analysis.misclassification_likelihood(nd)
        _emit(args, *report.likelihood_table(L, args.xi, args.zeta))
    return 0


def cmd_trend(args) -> int:
    bundle = thresholds.read_bundle(args.bundle)
    levels = []
    for lv, path in _parse_level_args(args.level):
        levels.append((lv, read_matrix(path, args.format or infer_format(path))))
    trends = analysis.perturbation_distance_trends(levels, bundle.centroids)
    _emit(args, *report.trend_table(trends))
    signs = trends.trend_signs()
    _note("d_true trend signs by class: " + ",".join(f"{s:+d}" for s in signs))
    return 0


def cmd_fit(args) -> int:
    if args.xy:
        data = np.loadtxt(args.xy, delimiter=",", skiprows=1, ndmin=2)
        fit = analysis.linear_fit(data[:, 0], data[:, 1])
    else:
        if not args.input or not args.bundle:
            raise SoftgateError("fit needs --xy, or --in together with --bundle")
        m = _read(args)
        bundle = thresholds.read_bundle(args.bundle)
        stats = analysis.distance_stats(m, bundle.centroids)
        acc = analysis.class_accuracy(m)
        xs, ys = [], []
        for c in range(m.k):
            s = stats.correct[c]
            if s.missing or np.isnan(acc[c]):
                _note(f"class {c} skipped (no data)")
                continue
            xs.append(s.mean)
            ys.append(float(acc[c]))
        fit = analysis.linear_fit(xs, ys)
    _emit(args, *report.fit_table(fit))
    return 0


def cmd_idx(args) -> int:
    rep = idx.inspect(args.path)
    if args.json:
        print(json.dumps(rep.__dict__))
    else:
        for line in rep.lines():
            print(line)
    return 0 if rep.ok else 1


def cmd_perturb(args) -> int:
    images = idx.read_idx_images(args.images)
    labels = idx.read_idx_labels(args.labels)
    result = perturb.generate_permnist(
        images,
        labels,
        mode=args.mode,
        seed=args.seed,
        out_dir=_out_dir(args),
        split=args.split,
        types=_parse_int_list(args.types),
        levels=_parse_int_list(args.levels),
    )
    _note(
        f"{result.mode}: {result.input_count} input images -> "
        f"{result.output_count} output images"
    )
    for key, path in sorted(result.paths.items()):
        print(f"{key}: {path}")
    return 0


def cmd_report(args) -> int:
    m = _read(args)
    bundle = thresholds.read_bundle(args.bundle)
    part = partition(m)
    correct = m.take(part.correct)

    stats = analysis.distance_stats(m, bundle.centroids)
    cm = analysis.confusion_matrix(m)
    overlap = thresholds.overlap_stats(correct, bundle)
    sweep = thresholds.threshold_sweep(m, bundle)
    nd = analysis.nearest_distance_matrix(m, bundle.centroids)
    likelihood = None
    try:
        likelihood = analysis.misclassification_likelihood(nd)
    except SoftgateError as e:
        _note(str(e))

    fit = None
    acc = analysis.class_accuracy(m)
    xs = [stats.correct[c].mean for c in range(m.k)
          if not stats.correct[c].missing and not np.isnan(acc[c])]
    ys = [float(acc[c]) for c in range(m.k)
          if not stats.correct[c].missing and not np.isnan(acc[c])]
    if len(set(xs)) >= 2:
        fit = analysis.linear_fit(xs, ys)

    aggregate = trends = None
    if args.level:
        levels = [
            (lv, read_matrix(p, args.format or infer_format(p)))
            for lv, p in sorted(_parse_level_args(args.level))
        ]
        mats = []
        for _, lm in levels:
            try:
                mats.append(
                    analysis.misclassification_likelihood(
                        analysis.nearest_distance_matrix(lm, bundle.centroids)
                    )
                )
            except SoftgateError as e:
                _note(str(e))
        if mats:
            aggregate = analysis.aggregate_likelihoods(mats)
        trends = analysis.perturbation_distance_trends(levels, bundle.centroids)

    rep = report.assemble_report(
        bundle,
        stats=stats,
        confusion=cm,
        overlap=overlap,
        sweep=sweep,
        nearest=nd,
        likelihood=likelihood,
        aggregate=aggregate,
        trends=trends,
        fit=fit,
        xi=args.xi,
        zeta=args.zeta,
    )
    out_dir = _out_dir(args)
    paths = report.write_report(rep, out_dir)
    if not args.no_figures:
        fig_paths = figures.render_report_figures(
            out_dir,
            confusion=cm,
            sweep=sweep,
            likelihood=likelihood,
            stats=stats,
            trends=trends,
            xi=args.xi,
            zeta=args.zeta,
        )
        paths.update(fig_paths)
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}")
    for note in rep.notes:
        _note(note)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(p, bundle=False, matrix=False, out_dir=False):
    p.add_argument("--json", action="store_true", help="emit a JSON envelope instead of csv")
    p.add_argument("--format", choices=["smx", "csv"], default=None,
                   help="matrix file format (default: inferred from extension)")
    if matrix:
        p.add_argument("--in", dest="input", required=True, help="prediction matrix file")
    if bundle:
        p.add_argument("--bundle", required=True, help="calibration bundle (SGB1)")
    if out_dir:
        p.add_argument("--out-dir", default=None,
                       help="output directory (fallback: $SOFTGATE_OUT_DIR, then cwd)")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="softgate",
        description="Distance-to-centroid gating toolkit for classifier predictions.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("validate", help="check matrix invariants, reporting every violation")
    _add_common(sp, matrix=True)
    sp.add_argument("--tol", type=float, default=1e-6, help="probability mass tolerance")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("synth", help="generate a deterministic synthetic prediction matrix")
    _add_common(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--per-class-n", type=int, default=1000)
    sp.add_argument("--concentration", type=float, default=9.0)
    sp.add_argument("--error-rate", type=float, default=0.02)
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("calibrate", help="build centroids and thresholds into a bundle")
    _add_common(sp, matrix=True)
    sp.add_argument("--out", required=True, help="bundle output path")
    sp.add_argument("--initial-centroids", action="store_true",
                    help="skip K-Means refinement; use per-class means directly")
    sp.add_argument("--max-iter", type=int, default=300)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--fallback", choices=[thresholds.FALLBACK_ACCEPT,
                                           thresholds.FALLBACK_MAX_CORRECT],
                    default=thresholds.FALLBACK_ACCEPT,
                    help="threshold policy for classes with no incorrect rows")
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("gate", help="accept/defer decisions for predictions")
    _add_common(sp, bundle=True)
    sp.add_argument("--in", dest="input", default=None, help="prediction matrix file")
    sp.add_argument("--probs", default=None, help="single comma-separated softmax vector")
    sp.set_defaults(func=cmd_gate)

    sp = sub.add_parser("overlap", help="correct predictions at or beyond threshold")
    _add_common(sp, bundle=True, matrix=True)
    sp.set_defaults(func=cmd_overlap)

    sp = sub.add_parser("sweep", help="coverage/accuracy as thresholds shrink")
    _add_common(sp, bundle=True, matrix=True)
    sp.add_argument("--factors", default=None, help="comma-separated decrement factors in [0,1)")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("stats", help="distance summary per class and correctness side")
    _add_common(sp, bundle=True, matrix=True)
    sp.add_argument("--group-by", choices=["pred", "true"], default="pred")
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("confusion", help="true-by-predicted count matrix")
    _add_common(sp, matrix=True)
    sp.set_defaults(func=cmd_confusion)

    sp = sub.add_parser("likelihood", help="nearest-distance and misclassification-likelihood matrices")
    _add_common(sp, bundle=True)
    sp.add_argument("--in", dest="input", default=None)
    sp.add_argument("--kind", choices=["D", "L", "aggregate"], default="L")
    sp.add_argument("--level", action="append", default=[],
                    help="LEVEL=PATH (repeatable, for --kind aggregate)")
    sp.add_argument("--consistency-threshold", type=float, default=0.1)
    sp.add_argument("--xi", type=float, default=report.DEFAULT_XI)
    sp.add_argument("--zeta", type=float, default=report.DEFAULT_ZETA)
    sp.set_defaults(func=cmd_likelihood)

    sp = sub.add_parser("trend", help="distance trends across perturbation levels")
    _add_common(sp, bundle=True)
    sp.add_argument("--level", action="append", default=[], required=True,
                    help="LEVEL=PATH (repeatable)")
    sp.set_defaults(func=cmd_trend)

    sp = sub.add_parser("fit", help="least-squares fit of accuracy vs mean distance")
    _add_common(sp)
    sp.add_argument("--in", dest="input", default=None)
    sp.add_argument("--bundle", default=None)
    sp.add_argument("--xy", default=None, help="csv of x,y pairs (header skipped)")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("idx", help="IDX dataset file tools")
    idx_sub = sp.add_subparsers(dest="idx_command", required=True)
    ip = idx_sub.add_parser("inspect", help="print header fields and size check")
    ip.add_argument("path")
    ip.add_argument("--json", action="store_true")
    ip.set_defaults(func=cmd_idx)

    sp = sub.add_parser("perturb", help="generate the perturbed companion dataset")
    sp.add_argument("--images", required=True, help="source images (idx3)")
    sp.add_argument("--labels", required=True, help="source labels (idx1)")
    sp.add_argument("--mode", choices=[perturb.MODE_PAIRED, perturb.MODE_GRID], required=True)
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.add_argument("--split", choices=["train", "test"], default="train")
    sp.add_argument("--types", default=None, help="comma-separated type codes (default all 12)")
    sp.add_argument("--levels", default=None, help="comma-separated levels 1..10 (default all)")
    sp.add_argument("--out-dir", default=None)
    sp.set_defaults(func=cmd_perturb)

    sp = sub.add_parser("report", help="full report: document, csv sidecars and figures")
    _add_common(sp, bundle=True, matrix=True, out_dir=True)
    sp.add_argument("--level", action="append", default=[],
                    help="LEVEL=PATH perturbation-level matrices (repeatable)")
    sp.add_argument("--xi", type=float, default=report.DEFAULT_XI)
    sp.add_argument("--zeta", type=float, default=report.DEFAULT_ZETA)
    sp.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    sp.set_defaults(func=cmd_report)

    return p


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            code = args.func(args)
        for w in caught:
            _note(str(w.message))
        return code
    except BrokenPipeError:
        # downstream consumer (head, less) closed the pipe; not our error
        try:
            sys.stdout.close()
        except OSError:
            pass
        return 0
    except (SoftgateError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
