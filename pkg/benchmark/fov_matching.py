import sys
import time

import fovmatch
from fovmatch.aggregate import prepare_working_grid
from fovmatch.mask import search_box, support_mask
from fovmatch.patchmatch import PatchMatchProblem, run_realizations

T = int(sys.argv[1]) if (len(sys.argv) > 1) else 5  # number of trials
GRID = int(sys.argv[2]) if (len(sys.argv) > 2) else 256  # phantom voxels per axis
DOWNSAMPLE_FACTORS = [2, 4, 8]
CALLBACKS = False


def createPair(grid):
    spec = fovmatch.PhantomSpec.textured(0, grid_dims=(grid, ) * 3, truth_shift_mm=(24., -16., 8.), gain=1.5, bias=0.1)
    return fovmatch.generate(spec)


def runEstimateBenchmark(pair, params):
    callbacks = [fovmatch.CallbackVerbose()] if CALLBACKS else None
    duration = []
    for i in range(T):
        c_start = time.time()
        fovmatch.estimate_global_shift(pair.fixed, pair.moving, pair.mask, params, callbacks)
        c_end = time.time()
        duration.append(1e3 * (c_end - c_start))

    avrg_duration = sum(duration) / len(duration)
    min_duration = min(duration)
    max_duration = max(duration)
    return avrg_duration, min_duration, max_duration


def runRealizationsBenchmark(pair, params):
    Ir, Jr, Mr = prepare_working_grid(pair.fixed, pair.moving, pair.mask, params)
    box = search_box(Mr, support_mask(Jr), params.box_margin)
    problem = PatchMatchProblem.fromVolumes(Ir, Jr, box, params.metric_kind, params.patch)
    run_realizations(problem, params.replace(realizations=1))  # compile the kernels
    duration = []
    for i in range(T):
        c_start = time.time()
        run_realizations(problem, params)
        c_end = time.time()
        duration.append(1e3 * (c_end - c_start))

    avrg_duration = sum(duration) / len(duration)
    min_duration = min(duration)
    max_duration = max(duration)
    return avrg_duration, min_duration, max_duration


pair = createPair(GRID)
print('\033[1m')
for factor in DOWNSAMPLE_FACTORS:
    params = fovmatch.PMParams(downsample_factor=factor)
    print('DS-%d (%d^3 at 1 mm, %d threads):' % (factor, GRID, params.threads))
    avrg_duration, min_duration, max_duration = runRealizationsBenchmark(pair, params)
    print('  run_realizations [ms]: {0} ({1}, {2})'.format(avrg_duration, min_duration, max_duration))
    avrg_duration, min_duration, max_duration = runEstimateBenchmark(pair, params)
    print('  estimate_global_shift [ms]: {0} ({1}, {2})'.format(avrg_duration, min_duration, max_duration))
print('\033[0m')
