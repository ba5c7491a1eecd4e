"""
Command-line entry point: fovmatch {register,phantom,dice,bench}.
"""

import argparse
import logging
import os
import sys
import time

import numpy as np

from .aggregate import estimate_global_shift, write_histogram_csv, write_report
from .config import parse_bool, read_key_values
from .evaluation import align_moving, dice, evaluate_alignment, shift_error, write_results_csv
from .exceptions import FovMatchError
from .mask import adjust_mask, load_mask, save_mask
from .metric import MetricKind, PatchSpec
from .patchmatch import CallbackVerbose, PMParams
from .phantom import PhantomSpec, generate, load_phantom_spec, read_truth, save_phantom_spec, write_truth
from .volume import load_volume, save_volume

logger = logging.getLogger(__name__)

SWEEPS = {
    "downsample": ["2", "4", "8"],
    "patch": ["3", "5", "7", "9", "11"],
    "bins": ["10", "30", "50", "70", "90"],
    "mask": ["-3", "-2", "-1", "0", "1", "2", "3"],
    "metric": ["ea", "l2"],
    "needles": ["0", "2", "4"],
    "noise": ["0", "0.01", "0.03", "0.05"],
}


def _addParamsArguments(parser):
    defaults = PMParams(threads=1)
    group = parser.add_argument_group("PatchMatch parameters")
    group.add_argument("--downsample", dest="downsample_factor", type=int, default=defaults.downsample_factor,
                       help="down-sampling factor of the working grid (default: %(default)s)")
    group.add_argument("--patch-size", type=int, default=defaults.patch.edge,
                       help="odd patch edge in voxels (default: %(default)s)")
    group.add_argument("--iterations", type=int, default=defaults.iterations)
    group.add_argument("--alpha", type=float, default=defaults.alpha, help="random search decay")
    group.add_argument("--realizations", type=int, default=defaults.realizations)
    group.add_argument("--seed", type=int, default=defaults.seed)
    group.add_argument("--metric", choices=["ea", "l2"], default="ea")
    group.add_argument("--hist-lo", type=float, default=defaults.bounds_mm[0], help="histogram lower bound in mm")
    group.add_argument("--hist-hi", type=float, default=defaults.bounds_mm[1], help="histogram upper bound in mm")
    group.add_argument("--bins", type=int, default=defaults.bins)
    group.add_argument("--threads", type=int, default=None, help="default: number of processors")
    group.add_argument("--target-spacing", dest="target_spacing_mm", type=float, default=defaults.target_spacing_mm)
    group.add_argument("--box-margin", type=int, default=defaults.box_margin, help="search box margin in voxels")
    group.add_argument("--pooled-histogram", action="store_true", help="histogram over all realizations")
    group.add_argument("--alternate-scan", action="store_true", help="reverse the scan on odd iterations")


def params_from_args(args):
    return PMParams(downsample_factor=args.downsample_factor,
                    patch=PatchSpec.fromEdge(args.patch_size),
                    iterations=args.iterations,
                    alpha=args.alpha,
                    realizations=args.realizations,
                    seed=args.seed,
                    metric_kind=MetricKind.fromName(args.metric),
                    bounds_mm=(args.hist_lo, args.hist_hi),
                    bins=args.bins,
                    threads=args.threads,
                    target_spacing_mm=args.target_spacing_mm,
                    box_margin=args.box_margin,
                    pooled_histogram=args.pooled_histogram,
                    alternate_scan=args.alternate_scan)


def build_parser():
    parser = argparse.ArgumentParser(prog="fovmatch",
                                     description="Global field-of-view matching of multi-modal 3D volumes")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug")
    parser.add_argument("--config", help="key = value file setting any flag of the subcommand")
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True

    register = commands.add_parser("register", help="estimate the global shift of a moving image")
    register.add_argument("--fixed", help="fixed image (MetaImage)")
    register.add_argument("--moving", help="moving image (MetaImage)")
    register.add_argument("--mask", help="organ mask on the fixed image (MetaImage)")
    register.add_argument("--moving-mask", help="organ mask on the moving image, adds DSC to the report")
    register.add_argument("--truth", help="truth file, adds the shift error to the report")
    register.add_argument("--output-dir", default=".")
    register.add_argument("--report", default="report.txt", help="report file name inside the output directory")
    register.add_argument("--histogram-csv", default="histograms.csv")
    register.add_argument("--write-shifted", help="write the moving image aligned on the fixed one")
    _addParamsArguments(register)

    phantom = commands.add_parser("phantom", help="generate a synthetic pair with known shift")
    phantom.add_argument("--spec", help="phantom spec file (key = value); otherwise a textured phantom")
    phantom.add_argument("--output-dir", default=".")
    phantom.add_argument("--seed", type=int, default=0)
    phantom.add_argument("--grid", type=int, default=192, help="voxels per axis")
    phantom.add_argument("--spacing", type=float, default=1., help="voxel spacing in mm")
    phantom.add_argument("--truth-shift", type=float, nargs=3, metavar=("X", "Y", "Z"), default=(24., -16., 8.))
    phantom.add_argument("--transfer", choices=["affine_gain_bias", "inverted", "gamma"], default="affine_gain_bias")
    phantom.add_argument("--gain", type=float, default=1.5)
    phantom.add_argument("--bias", type=float, default=0.1)
    phantom.add_argument("--gamma", type=float, default=1.)
    phantom.add_argument("--noise", type=float, default=0.)
    phantom.add_argument("--needles", type=int, default=0)
    phantom.add_argument("--cylinder-radius", type=float, default=None, help="cylindrical FOV radius in mm")
    phantom.add_argument("--crop", type=int, default=0, help="voxels removed on every side of the moving image")

    dice_ = commands.add_parser("dice", help="print the DSC of two masks")
    dice_.add_argument("first")
    dice_.add_argument("second")

    bench = commands.add_parser("bench", help="calibration sweep over seeded phantoms")
    bench.add_argument("--sweep", choices=sorted(SWEEPS), default="downsample")
    bench.add_argument("--values", nargs="+", help="sweep values (default depends on the sweep)")
    bench.add_argument("--cases", type=int, default=3)
    bench.add_argument("--grid", type=int, default=192, help="phantom voxels per axis")
    bench.add_argument("--spacing", type=float, default=1., help="phantom voxel spacing in mm")
    bench.add_argument("--max-shift", type=float, default=80., help="truth shifts drawn in [-max, max] mm")
    bench.add_argument("--transfer", choices=["affine_gain_bias", "inverted", "gamma"], default="affine_gain_bias")
    bench.add_argument("--noise", type=float, default=0.02)
    bench.add_argument("--needles", type=int, default=0)
    bench.add_argument("--output", default="bench.csv")
    _addParamsArguments(bench)
    return parser


def _applyConfig(parser, args, argv):
    """ Re-parse argv with the config file values as subcommand defaults """
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in read_key_values(args.config, args.command).items():
        dest = key
        if dest not in actions:
            # flags whose destination differs from their spelling
            matches = [a.dest for a in sub._actions if "--" + key.replace("_", "-") in a.option_strings]
            if not matches:
                raise ValueError("unknown configuration key %r in %s" % (key, args.config))
            dest = matches[0]
        action = actions[dest]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[dest] = parse_bool(value)
        elif action.nargs not in (None, "?"):
            defaults[dest] = [action.type(v) if action.type else v for v in value.split()]
        else:
            defaults[dest] = action.type(value) if action.type else value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _requirePaths(args, names):
    missing = ["--" + n.replace("_", "-") for n in names if not getattr(args, n)]
    if missing:
        raise ValueError("missing required option(s): %s" % ", ".join(missing))


def cmd_register(args):
    _requirePaths(args, ["fixed", "moving", "mask"])
    params = params_from_args(args)
    fixed = load_volume(args.fixed)
    moving = load_volume(args.moving)
    mask = load_mask(args.mask)
    movingMask = load_mask(args.moving_mask) if args.moving_mask else None
    truth = read_truth(args.truth) if args.truth else None

    callbacks = [CallbackVerbose(logging.DEBUG)] if args.verbose > 1 else None
    start = time.perf_counter()
    result = estimate_global_shift(fixed, moving, mask, params, callbacks)
    runtime = time.perf_counter() - start

    extra = {"fixed": args.fixed, "moving": args.moving, "mask": args.mask}
    if movingMask is not None:
        extra.update(evaluate_alignment(mask, movingMask, result, truth, runtime).asDict())
    else:
        if truth is not None:
            extra.update(("shift_error_%s_mm" % a, e) for a, e in zip("xyz", shift_error(result, truth)))
        extra["runtime_seconds"] = runtime
    os.makedirs(args.output_dir, exist_ok=True)
    write_report(os.path.join(args.output_dir, args.report), result, params, extra)
    write_histogram_csv(result, os.path.join(args.output_dir, args.histogram_csv))
    if args.write_shifted:
        save_volume(align_moving(moving, result), os.path.join(args.output_dir, args.write_shifted))
    print("shift_mm: %.3f %.3f %.3f" % result.shift_mm)
    return 0


def phantom_spec_from_args(args):
    if args.spec:
        return load_phantom_spec(args.spec)
    crop = ((args.crop, args.crop), ) * 3
    return PhantomSpec.textured(args.seed,
                                grid_dims=(args.grid, ) * 3,
                                spacing_mm=(args.spacing, ) * 3,
                                truth_shift_mm=tuple(args.truth_shift),
                                modality_b=args.transfer,
                                gain=args.gain,
                                bias=args.bias,
                                gamma=args.gamma,
                                noise_sigma=args.noise,
                                needles=args.needles,
                                cylinder_fov_mm=args.cylinder_radius,
                                crop_b=crop)


def write_phantom(pair, spec, outdir):
    os.makedirs(outdir, exist_ok=True)
    save_volume(pair.fixed, os.path.join(outdir, "fixed.mha"))
    save_volume(pair.moving, os.path.join(outdir, "moving.mha"))
    save_mask(pair.mask, os.path.join(outdir, "mask.mha"))
    save_mask(pair.moving_mask, os.path.join(outdir, "moving_mask.mha"))
    write_truth(os.path.join(outdir, "truth.txt"), pair.truth_mm)
    save_phantom_spec(spec, os.path.join(outdir, "phantom.cfg"))


def cmd_phantom(args):
    spec = phantom_spec_from_args(args)
    write_phantom(generate(spec), spec, args.output_dir)
    logger.info("phantom written to %s", args.output_dir)
    return 0


def cmd_dice(args):
    print(repr(dice(load_mask(args.first), load_mask(args.second))))
    return 0


def bench_case(args, case, needles=None, noise=None):
    rng = np.random.default_rng([args.seed, case])
    truth = rng.uniform(-args.max_shift, args.max_shift, 3)
    return PhantomSpec.textured(args.seed + case,
                                grid_dims=(args.grid, ) * 3,
                                spacing_mm=(args.spacing, ) * 3,
                                truth_shift_mm=tuple(truth),
                                modality_b=args.transfer,
                                gain=1.5,
                                bias=1. if args.transfer == "inverted" else 0.1,
                                gamma=0.5,
                                noise_sigma=args.noise if noise is None else noise,
                                needles=args.needles if needles is None else needles)


def cmd_bench(args):
    base = params_from_args(args)
    values = args.values or SWEEPS[args.sweep]
    rows = []
    cache = {}
    for value in values:
        params, steps, needles, noise = base, 0, None, None
        if args.sweep == "downsample":
            params = base.replace(downsample_factor=int(value))
        elif args.sweep == "patch":
            params = base.replace(patch=PatchSpec.fromEdge(int(value)))
        elif args.sweep == "bins":
            params = base.replace(bins=int(value))
        elif args.sweep == "metric":
            params = base.replace(metric_kind=MetricKind.fromName(value))
        elif args.sweep == "mask":
            steps = int(value)
        elif args.sweep == "needles":
            needles = int(value)
        elif args.sweep == "noise":
            noise = float(value)
        for case in range(args.cases):
            key = (case, needles, noise)
            if key not in cache:
                # one artifact setting at a time
                if any(k[1:] != key[1:] for k in cache):
                    cache.clear()
                cache[key] = generate(bench_case(args, case, needles, noise))
            pair = cache[key]
            mask = adjust_mask(pair.mask, steps)
            start = time.perf_counter()
            result = estimate_global_shift(pair.fixed, pair.moving, mask, params)
            runtime = time.perf_counter() - start
            report = evaluate_alignment(pair.mask, pair.moving_mask, result, pair.truth_mm, runtime)
            row = {"sweep": args.sweep, "value": value, "case": case}
            row.update(("truth_%s_mm" % a, t) for a, t in zip("xyz", pair.truth_mm))
            row.update(("shift_%s_mm" % a, s) for a, s in zip("xyz", result.shift_mm))
            row.update(report.asDict())
            row["mask_volume_ml"] = mask.count * float(np.prod(mask.spacing)) / 1000.
            rows.append(row)
            logger.info("%s=%s case %d: error %s mm, dsc %.3f -> %.3f, %.2f s", args.sweep, value, case,
                        report.shift_error_mm, report.dsc_before, report.dsc_after, runtime)
    write_results_csv(rows, args.output)
    return 0


COMMANDS = {"register": cmd_register, "phantom": cmd_phantom, "dice": cmd_dice, "bench": cmd_bench}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(asctime)s %(name)s %(levelname)s: %(message)s")
    try:
        if args.config:
            args = _applyConfig(parser, args, argv)
        return COMMANDS[args.command](args)
    except (FovMatchError, OSError, ValueError) as e:
        print("fovmatch %s: error: %s" % (args.command, e), file=sys.stderr)
        return 1
