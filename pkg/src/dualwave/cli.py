"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 estimation failure.

A JSON config file (``--config``) may hold one object per subcommand whose
keys are that subcommand's long option names with dashes replaced by
underscores, plus an ``estimators`` object overriding the preset estimator
settings.  Command-line flags take precedence over the file, which takes
precedence over built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict, fields, replace

import numpy as np

from .errors import DataError, DualwaveError, EstimationError, InputError
from .experiments import (
    DEFAULT_ESTIMATORS,
    DEFAULT_H_GRID,
    Estimator,
    StudyConfig,
    run_feature_study,
    run_mixed_H_experiment,
    run_simulation_study,
)
from .fbm import FbmSpec, generate_fbm2d
from .features import FeatureConfig, extract_batch, read_manifest, write_feature_csv
from .filters import FILTER_NAMES, make_filter
from .imageio import CropSpec, crop_region, load_image, save_image
from .wavelet import dwt2d, ndwt2d, side_exponent

log = logging.getLogger("dualwave")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ESTIMATION = 0, 1, 2, 3

COMMANDS = ("simulate", "transform", "estimate", "study", "mixed", "features", "classify")
ESTIMATOR_KEYS = {f.name for f in fields(Estimator)} - {"name"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ----------------------------------------------------------------------
# config


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config file must contain a JSON object")
    unknown = set(cfg) - set(COMMANDS) - {"estimators"}
    if unknown:
        raise UsageError(f"unknown config sections: {', '.join(sorted(unknown))}")
    return cfg


def estimators_from_config(cfg: dict) -> dict:
    """Preset estimators with any ``estimators`` overrides from the config applied."""
    presets = dict(DEFAULT_ESTIMATORS)
    for name, overrides in cfg.get("estimators", {}).items():
        if not isinstance(overrides, dict):
            raise UsageError(f"estimators.{name} must be an object")
        bad = set(overrides) - ESTIMATOR_KEYS
        if bad:
            raise UsageError(f"unknown estimator keys for {name}: {', '.join(sorted(bad))}")
        base = presets.get(name, Estimator(name, overrides.get("method", "dual")))
        presets[name] = replace(base, **overrides)
    return presets


def _apply_section(sub: argparse.ArgumentParser, section: dict, name: str):
    dests = {a.dest for a in sub._actions}
    bad = set(section) - dests
    if bad:
        raise UsageError(f"unknown keys in config section {name!r}: {', '.join(sorted(bad))}")
    sub.set_defaults(**section)


# ----------------------------------------------------------------------
# helpers


def _float_list(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from exc


def _write_json(obj, path):
    text = json.dumps(obj, indent=2)
    if path in (None, "-"):
        print(text)
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _out_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _read_square(path, args):
    image = load_image(path)
    if getattr(args, "crop_size", None):
        spec = CropSpec(args.crop_size, args.edge_offset, args.orientation, args.seed)
        image = crop_region(image, spec)
    try:
        side_exponent(image)
    except InputError as exc:
        raise DataError(f"{path}: {exc}; use --crop-size for larger images") from exc
    return image


def _add_crop_flags(p):
    p.add_argument("--crop-size", type=int, default=None,
                   help="crop a square region of this power-of-two size first")
    p.add_argument("--edge-offset", type=int, default=30)
    p.add_argument("--orientation", choices=("left", "right", "auto"), default="auto")


# ----------------------------------------------------------------------
# subcommands


def cmd_simulate(args, cfg):
    spec = FbmSpec(args.H, args.N, args.seed)
    field_ = generate_fbm2d(spec, method=args.method)
    save_image(args.output, field_, bits=args.bits)
    log.info("wrote %s", args.output)
    return EXIT_OK


def cmd_transform(args, cfg):
    image = _read_square(args.image, args)
    filt = make_filter(args.filter, args.param)
    J = side_exponent(image)
    L = J if args.levels is None else args.levels
    if args.kind == "dwt2d":
        dec = dwt2d(image, filt, L)
    else:
        dec = ndwt2d(image, filt, L, full=args.full)
    arrays = {f"diag_{j}": v for j, v in dec.diagonal_details.items()}
    arrays["approximation"] = dec.approximation
    if dec.coefficients is not None:
        arrays["coefficients"] = dec.coefficients
    if args.full and dec.regions is not None:
        for (r, c), v in dec.regions.items():
            key = "region_approx" if r is None and c is None else f"region_{r}_{c}"
            arrays[key] = v
    meta = {"kind": dec.kind, "J": dec.J, "L": dec.L, "filter": filt.to_dict()}
    np.savez(args.output, meta=json.dumps(meta), **arrays)
    log.info("wrote %s", args.output)
    return EXIT_OK


def _estimator_for(args, cfg):
    presets = estimators_from_config(cfg)
    name = args.estimator or ("H_d" if args.method == "dual" else "H_p_ndwt")
    if name not in presets:
        raise UsageError(f"unknown estimator preset {name!r}")
    est = presets[name]
    if args.method is not None and args.method != est.method:
        raise UsageError(f"preset {name} is a {est.method} estimator")
    overrides = {
        k: getattr(args, k)
        for k in ("filter", "filter_param", "transform", "xq", "p1", "p2", "j1", "j2")
        if getattr(args, k) is not None
    }
    return replace(est, **overrides)


def cmd_estimate(args, cfg):
    est = _estimator_for(args, cfg)
    image = _read_square(args.image, args)
    try:
        fit = est.estimate(image, args.levels)
    except EstimationError as exc:
        if exc.fit is not None and args.points_csv:
            exc.fit.to_csv(args.points_csv)
        raise
    out = fit.to_dict()
    out["estimator"] = asdict(est)
    _write_json(out, args.output)
    if args.points_csv:
        fit.to_csv(args.points_csv)
    if args.plot:
        from .plotting import plot_spectra

        plot_spectra(fit, args.plot)
    return EXIT_OK


def _resolve_estimators(names, cfg):
    presets = estimators_from_config(cfg)
    chosen = []
    for name in names:
        if name not in presets:
            raise UsageError(f"unknown estimator {name!r}; known: {', '.join(presets)}")
        chosen.append(presets[name])
    return tuple(chosen)


def _boxplot_rows(result):
    rows = []
    for name in result.estimator_names:
        for H, stats in result.per_H(name).items():
            vals = np.array([r["H_hat"] for r in result.records
                             if r["estimator"] == name and r["H"] == H and r["error"] is None])
            q = np.quantile(vals, [0, 0.25, 0.5, 0.75, 1]) if vals.size else [np.nan] * 5
            rows.append({"estimator": name, "H": H, "n": int(vals.size),
                         "min": q[0], "q1": q[1], "median": q[2], "q3": q[3], "max": q[4],
                         "mean": stats["mean"], "mse": stats["mse"]})
    return rows


def cmd_study(args, cfg):
    names = args.estimators.split(",") if args.estimators else list(DEFAULT_ESTIMATORS)
    study = StudyConfig(
        H_grid=tuple(args.H_grid),
        N=args.N,
        replicates=args.replicates,
        estimators=_resolve_estimators(names, cfg),
        base_seed=args.seed,
        L=args.levels,
        source=args.source,
    )
    result = run_simulation_study(study)
    out = _out_dir(args.out_dir)
    result.write_csv(os.path.join(out, "study_records.csv"))
    result.write_json(os.path.join(out, "study_summary.json"))
    rows = _boxplot_rows(result)
    with open(os.path.join(out, "study_boxplot.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    if not args.no_plot:
        from .plotting import plot_study_boxplots

        plot_study_boxplots(result, os.path.join(out, "study_boxplots.png"))
    print(f"{'estimator':<12} {'settings':<22} {'AMSE':>10} {'MC SE':>10} {'failures':>8}")
    for name in result.estimator_names:
        est = next(e for e in study.estimators if e.name == name)
        print(f"{name:<12} {est.settings:<22} {result.amse(name):10.5f} "
              f"{result.amse_se(name):10.5f} {result.failures(name):8d}")
    return EXIT_OK


def cmd_mixed(args, cfg):
    primal, dual = _resolve_estimators([args.primal, args.dual], cfg)
    result = run_mixed_H_experiment(
        H_lo=args.H_lo,
        H_hi=args.H_hi,
        swap_levels=args.swap_levels,
        replicates=args.replicates,
        N=args.N,
        seed=args.seed,
        primal=primal,
        dual=dual,
    )
    out = _out_dir(args.out_dir)
    _write_json(result.to_dict(), os.path.join(out, "mixed.json"))
    with open(os.path.join(out, "mixed_estimates.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pair", "primal", "dual"])
        for i, (p, d) in enumerate(zip(result.primal, result.dual)):
            w.writerow([i, repr(float(p)), repr(float(d))])
    if not args.no_plot:
        from .plotting import plot_mixed

        plot_mixed(result, os.path.join(out, "mixed.png"))
    t = result.test
    print(f"mean primal {np.mean(result.primal):.4f}  mean dual {np.mean(result.dual):.4f}  "
          f"t = {t.statistic:.3f}  df = {t.df}  p = {t.p_value:.3g}")
    return EXIT_OK


def cmd_features(args, cfg):
    entries = read_manifest(args.manifest)
    crop = None
    if args.crop_size:
        crop = CropSpec(args.crop_size, args.edge_offset, args.orientation, args.seed)
    config = FeatureConfig(estimators_from_config(cfg), crop, args.levels)
    rows, errors = extract_batch(entries, config, jobs=args.jobs)
    write_feature_csv(args.output, rows)
    for err in errors:
        log.error("%s", err)
    return EXIT_DATA if errors else EXIT_OK


def cmd_classify(args, cfg):
    sets = None
    if args.sets:
        try:
            with open(args.sets) as fh:
                sets = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read feature sets {args.sets}: {exc}") from exc
        if not isinstance(sets, dict) or not all(isinstance(v, list) for v in sets.values()):
            raise UsageError("feature sets file must map names to lists of feature names")
    result = run_feature_study(args.features, sets, k=args.k, r=args.r, seed=args.seed)
    prefix = args.output_prefix
    if os.path.dirname(prefix):
        os.makedirs(os.path.dirname(prefix), exist_ok=True)
    result.write_tables(prefix)
    _write_json(result.to_dict(), f"{prefix}.json")
    print(f"{'feature set':<28} {'sensitivity':>14} {'specificity':>14} {'accuracy':>14}")
    for row in result.metrics_rows():
        cells = [f"{row[m + '_mean']:.4f}±{row[m + '_sd']:.4f}"
                 for m in ("sensitivity", "specificity", "accuracy")]
        print(f"{row['feature_set']:<28} " + " ".join(f"{c:>14}" for c in cells))
    return EXIT_OK


# ----------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dualwave", description="Primal and dual wavelet spectra tools.")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = subs.add_parser("simulate", help="simulate a 2D fBm field")
    p.add_argument("--H", type=float, required=True)
    p.add_argument("--N", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", choices=("circulant", "cholesky"), default="circulant")
    p.add_argument("--bits", type=int, choices=(8, 16), default=16,
                   help="bit depth for PGM/PNG output")
    p.add_argument("-o", "--output", required=True, help=".npy, .pgm or .png")
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("transform", help="wavelet-decompose an image to .npz")
    p.add_argument("image")
    p.add_argument("--filter", choices=FILTER_NAMES, default="haar")
    p.add_argument("--param", type=float, default=None, help="pollen angle")
    p.add_argument("--kind", choices=("dwt2d", "ndwt2d"), default="ndwt2d")
    p.add_argument("--levels", type=int, default=None)
    p.add_argument("--full", action="store_true", help="keep every NDWT region")
    p.add_argument("--seed", type=int, default=0, help="crop seed")
    _add_crop_flags(p)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_transform)

    p = subs.add_parser("estimate", help="estimate H from one image")
    p.add_argument("image")
    p.add_argument("--method", choices=("dual", "primal"), default=None)
    p.add_argument("--estimator", default=None,
                   help="preset name (H_d, H_d2, H_p_ndwt, H_p_dwt)")
    p.add_argument("--filter", choices=FILTER_NAMES, default=None)
    p.add_argument("--filter-param", type=float, default=None)
    p.add_argument("--transform", choices=("dwt2d", "ndwt2d"), default=None)
    p.add_argument("--xq", type=int, default=None)
    p.add_argument("--p1", type=float, default=None)
    p.add_argument("--p2", type=float, default=None)
    p.add_argument("--j1", type=int, default=None)
    p.add_argument("--j2", type=int, default=None)
    p.add_argument("--levels", type=int, default=None)
    p.add_argument("--seed", type=int, default=0, help="crop seed")
    _add_crop_flags(p)
    p.add_argument("-o", "--output", default=None, help="JSON output (default stdout)")
    p.add_argument("--points-csv", default=None)
    p.add_argument("--plot", default=None, help="render the spectra to an image file")
    p.set_defaults(func=cmd_estimate)

    p = subs.add_parser("study", help="run the simulation study")
    p.add_argument("--H-grid", type=_float_list, default=DEFAULT_H_GRID)
    p.add_argument("--N", type=int, default=256)
    p.add_argument("--replicates", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--levels", type=int, default=None)
    p.add_argument("--source", choices=("fbm", "loglinear"), default="fbm")
    p.add_argument("--estimators", default=None, help="comma-separated preset names")
    p.add_argument("--out-dir", default="study_out")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_study)

    p = subs.add_parser("mixed", help="run the mixed-H experiment")
    p.add_argument("--H-lo", type=float, default=0.4)
    p.add_argument("--H-hi", type=float, default=0.6)
    p.add_argument("--swap-levels", type=int, default=3)
    p.add_argument("--replicates", type=int, default=100)
    p.add_argument("--N", type=int, default=512)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--primal", default="H_p_ndwt")
    p.add_argument("--dual", default="H_d")
    p.add_argument("--out-dir", default="mixed_out")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_mixed)

    p = subs.add_parser("features", help="extract features for a manifest of images")
    p.add_argument("manifest", help="CSV with path,label[,orientation]")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--levels", type=int, default=None)
    p.add_argument("--seed", type=int, default=0, help="crop seed")
    p.add_argument("--jobs", type=int, default=1)
    _add_crop_flags(p)
    p.set_defaults(func=cmd_features)

    p = subs.add_parser("classify", help="cross-validated feature-set comparison")
    p.add_argument("features", help="feature CSV with a label column")
    p.add_argument("--sets", default=None, help="JSON mapping set names to feature lists")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--r", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-prefix", default="classify_out/classify")
    p.set_defaults(func=cmd_classify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    try:
        cfg = load_config(known.config)
        subs = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
        for name, sub in subs.choices.items():
            _apply_section(sub, cfg.get(name, {}), name)
    except UsageError as exc:
        print(f"dualwave: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"dualwave: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s")
    try:
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"dualwave: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EstimationError as exc:
        print(f"dualwave: estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except (InputError, ValueError) as exc:
        print(f"dualwave: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"dualwave: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DualwaveError as exc:
        print(f"dualwave: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
