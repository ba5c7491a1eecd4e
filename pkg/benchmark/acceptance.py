"""
Phantom acceptance runs of the global shift estimation.

How to Run:        python acceptance.py [cases] [output.csv]
                   e.g.: python acceptance.py 20 /tmp/acceptance.csv

Every case is a textured 192^3 phantom at 1 mm with a truth shift drawn in
[-80, 80] mm per axis. The script prints one line per check and exits with a
non-zero status when one of them fails. The runtime checks time a 256^3 phantom
at DS-8 after a warm-up run and sweep the down-sampling factor through
`fovmatch bench`.
"""

import os
import sys
import tempfile
import time

import numpy as np
import pandas as pd

import fovmatch
from fovmatch.cli import main
from fovmatch.evaluation import write_results_csv

N = int(sys.argv[1]) if (len(sys.argv) > 1) else 20  # number of cases
OUTPUT = sys.argv[2] if (len(sys.argv) > 2) else None
TOLERANCE_MM = 12.
BIN_WIDTH_MM = 4.
MAX_SHIFT_MM = 80.
RUNTIME_GRID = 256
RUNTIME_LIMIT_S = 10.


def createSpec(case, transfer="affine_gain_bias", needles=0):
    rng = np.random.default_rng([2021, case])
    truth = rng.uniform(-MAX_SHIFT_MM, MAX_SHIFT_MM, 3)
    noise = rng.uniform(0., 0.05)
    return fovmatch.PhantomSpec.textured(case,
                                         truth_shift_mm=tuple(truth),
                                         modality_b=transfer,
                                         gain=1.5,
                                         bias=1. if transfer == "inverted" else 0.1,
                                         noise_sigma=noise,
                                         needles=needles)


def runCase(pair, params, mask=None):
    c_start = time.time()
    result = fovmatch.estimate_global_shift(pair.fixed, pair.moving, pair.mask if mask is None else mask, params)
    c_end = time.time()
    report = fovmatch.evaluate_alignment(pair.mask, pair.moving_mask, result, pair.truth_mm, c_end - c_start)
    return result, report


def recovered(report):
    return max(report.shift_error_mm) <= TOLERANCE_MM


def runtimeMeans(table):
    """ Mean runtime per down-sampling factor, in the order of the bench table """
    return table.groupby("value", sort=False)["runtime_seconds"].mean()


def strictlyDecreasing(means):
    return bool(np.all(np.diff(means.to_numpy()) < 0.))


rows = []
checks = []
params = fovmatch.PMParams()
paramsL2 = params.replace(metric_kind=fovmatch.MetricKind.L2)

# Shift recovery, DSC improvement, streaks and mask robustness on affine phantoms
errors, errorsNeedles, dscChecks, maskChecks = [], [], [], []
for case in range(N):
    pair = fovmatch.generate(createSpec(case))
    result, report = runCase(pair, params)
    rows.append(dict(check="affine", case=case, **report.asDict()))
    errors.append(np.mean(report.shift_error_mm))
    if recovered(report) and report.dsc_before < 0.5:
        dscChecks.append(report.dsc_after >= 0.8)
    for steps in (1, 2, 3):
        dilated, _ = runCase(pair, params, fovmatch.adjust_mask(pair.mask, steps))
        maskChecks.append(np.all(np.abs(np.subtract(dilated.shift_mm, result.shift_mm)) <= BIN_WIDTH_MM))
    pair = fovmatch.generate(createSpec(case, needles=4))
    _, report = runCase(pair, params)
    rows.append(dict(check="needles", case=case, **report.asDict()))
    errorsNeedles.append(np.mean(report.shift_error_mm))
    print('case %d: error %s mm, dsc %.3f -> %.3f, %.2f s' %
          (case, report.shift_error_mm, report.dsc_before, report.dsc_after, report.runtime_seconds))

success = sum(max(r["shift_error_x_mm"], r["shift_error_y_mm"], r["shift_error_z_mm"]) <= TOLERANCE_MM
              for r in rows if r["check"] == "affine")
checks.append(("shift recovery %d/%d" % (success, N), success >= 0.9 * N))
checks.append(("dsc after recovery (%d cases)" % len(dscChecks), all(dscChecks)))
increase = np.mean(errorsNeedles) - np.mean(errors)
checks.append(("streak error increase %.2f mm" % increase, increase <= 4.))
checks.append(("dilated masks within one bin", all(maskChecks)))

# Contrast reversal
M = max(1, N // 2)
successEA, failuresL2 = 0, 0
for case in range(M):
    pair = fovmatch.generate(createSpec(N + case, transfer="inverted"))
    _, reportEA = runCase(pair, params)
    _, reportL2 = runCase(pair, paramsL2)
    rows.append(dict(check="inverted-ea", case=case, **reportEA.asDict()))
    rows.append(dict(check="inverted-l2", case=case, **reportL2.asDict()))
    successEA += recovered(reportEA)
    failuresL2 += not recovered(reportL2)
checks.append(("inverted EA recovery %d/%d" % (successEA, M), successEA >= 0.9 * M))
checks.append(("inverted L2 failures %d/%d" % (failuresL2, M), failuresL2 >= 0.7 * M))

# Runtime at DS-8 on a 256^3 phantom and its trend over the down-sampling factors
spec = fovmatch.PhantomSpec.textured(0, grid_dims=(RUNTIME_GRID, ) * 3, truth_shift_mm=(24., -16., 8.), gain=1.5,
                                     bias=0.1)
pair = fovmatch.generate(spec)
runCase(pair, params)  # warm-up
_, report = runCase(pair, params)
checks.append(("DS-8 runtime on %d^3 %.2f s" % (RUNTIME_GRID, report.runtime_seconds),
               report.runtime_seconds < RUNTIME_LIMIT_S))
with tempfile.TemporaryDirectory() as tmp:
    bench = os.path.join(tmp, "downsample.csv")
    code = main([
        "bench", "--sweep", "downsample", "--values", "2", "4", "8", "--cases", "1", "--grid",
        str(RUNTIME_GRID), "--output", bench
    ])
    means = runtimeMeans(pd.read_csv(bench)) if code == 0 else None
checks.append(("runtime decreasing DS-2 > DS-4 > DS-8", means is not None and strictlyDecreasing(means)))

if OUTPUT:
    write_results_csv(rows, OUTPUT)

print('\033[1m')
for name, passed in checks:
    print('  %-40s %s' % (name, "ok" if passed else "FAILED"))
print('\033[0m')
sys.exit(not all(passed for _, passed in checks))
