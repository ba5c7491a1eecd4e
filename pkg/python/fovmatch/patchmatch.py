"""
3D PatchMatch between a fixed and a moving image living on the same working grid.

A realization starts from a random shift field whose targets are uniform in the
search box, then performs a fixed number of raster sweeps. At each voxel a
sweep first propagates the shifts of the already visited neighbours and then
runs a random search around the incumbent with radii w * alpha^i >= 1 voxel.
Only strict improvements are accepted, so the per-voxel score never increases.
"""

import dataclasses
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from numba import njit

from .exceptions import GridMismatchError
from .mask import SearchBox
from .metric import MetricKind, PatchSpec, _patch_cost, field_cost, metric_features

logger = logging.getLogger(__name__)


class ShiftField:
    """ Integer shift V(r) = (u, v, w) per voxel of the working grid plus its patch distance.

    :param data: int64 array (nz, ny, nx, 3), components in (x, y, z) order
    :param score: float64 array (nz, ny, nx)
    """
    def __init__(self, data, score=None):
        self.data = np.ascontiguousarray(data, dtype=np.int64)
        if self.data.ndim != 4 or self.data.shape[-1] != 3:
            raise ValueError("shift field data must be shaped (nz, ny, nx, 3), got %s" % (self.data.shape, ))
        if score is None:
            score = np.full(self.data.shape[:3], np.nan)
        self.score = np.ascontiguousarray(score, dtype=np.float64)
        if self.score.shape != self.data.shape[:3]:
            raise GridMismatchError("score shape %s does not match field shape %s" %
                                    (self.score.shape, self.data.shape[:3]))

    @property
    def dims(self):
        return self.data.shape[2::-1]

    def copy(self):
        return ShiftField(self.data.copy(), self.score.copy())

    def targets(self):
        """ r + V(r) as (x, y, z) voxel coordinates """
        return voxel_coordinates(self.data.shape[:3]) + self.data


def voxel_coordinates(shape):
    """ (x, y, z) coordinates of every voxel of an array shaped (nz, ny, nx) """
    zz, yy, xx = np.indices(shape, dtype=np.int64)
    return np.stack([xx, yy, zz], axis=-1)


@dataclass(frozen=True)
class PMParams:
    downsample_factor: int = 8
    patch: PatchSpec = field(default_factory=PatchSpec)
    iterations: int = 2
    alpha: float = 0.5
    realizations: int = 8
    seed: int = 0
    metric_kind: MetricKind = MetricKind.EA
    bounds_mm: Tuple[float, float] = (-100., 100.)
    bins: int = 50
    threads: Optional[int] = None
    target_spacing_mm: float = 1.
    box_margin: int = 0
    pooled_histogram: bool = False
    alternate_scan: bool = False

    def __post_init__(self):
        def positiveInt(name, value):
            if int(value) != value or value < 1:
                raise ValueError("%s must be a positive integer, got %r" % (name, value))
            object.__setattr__(self, name, int(value))

        positiveInt("downsample_factor", self.downsample_factor)
        positiveInt("iterations", self.iterations)
        positiveInt("realizations", self.realizations)
        positiveInt("bins", self.bins)
        if self.threads is None:
            object.__setattr__(self, "threads", os.cpu_count() or 1)
        positiveInt("threads", self.threads)
        if not isinstance(self.patch, PatchSpec):
            object.__setattr__(self, "patch", PatchSpec(self.patch))
        object.__setattr__(self, "metric_kind", MetricKind.fromName(self.metric_kind))
        if not 0. < self.alpha < 1.:
            raise ValueError("alpha must lie in (0, 1), got %r" % self.alpha)
        lo, hi = (float(b) for b in self.bounds_mm)
        if not lo < hi:
            raise ValueError("histogram bounds must satisfy lo < hi, got (%r, %r)" % (lo, hi))
        object.__setattr__(self, "bounds_mm", (lo, hi))
        if not self.target_spacing_mm > 0.:
            raise ValueError("target spacing must be positive, got %r" % self.target_spacing_mm)
        if int(self.box_margin) != self.box_margin or self.box_margin < 0:
            raise ValueError("box margin must be a non-negative integer, got %r" % self.box_margin)
        object.__setattr__(self, "box_margin", int(self.box_margin))
        object.__setattr__(self, "seed", int(self.seed))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def asDict(self):
        """ Flat view of every effective parameter, as echoed in reports """
        return {
            "downsample_factor": self.downsample_factor,
            "patch_size": self.patch.edge,
            "iterations": self.iterations,
            "alpha": self.alpha,
            "realizations": self.realizations,
            "seed": self.seed,
            "metric": self.metric_kind.name.lower(),
            "hist_lo_mm": self.bounds_mm[0],
            "hist_hi_mm": self.bounds_mm[1],
            "bins": self.bins,
            "threads": self.threads,
            "target_spacing_mm": self.target_spacing_mm,
            "box_margin": self.box_margin,
            "pooled_histogram": self.pooled_histogram,
            "alternate_scan": self.alternate_scan,
        }


class PatchMatchProblem:
    """ Fixed and moving features on a shared working grid, the search box and the patch distance.

    :param fixedFeatures: float64 array (nz, ny, nx, c), see metric.metric_features
    :param movingFeatures: float64 array with the same shape
    :param box: SearchBox on the working grid
    :param kind: MetricKind
    :param patch: PatchSpec
    """
    def __init__(self, fixedFeatures, movingFeatures, box, kind=MetricKind.EA, patch=PatchSpec()):
        self.fixedFeatures = np.ascontiguousarray(fixedFeatures, dtype=np.float64)
        self.movingFeatures = np.ascontiguousarray(movingFeatures, dtype=np.float64)
        if self.fixedFeatures.shape != self.movingFeatures.shape:
            raise GridMismatchError("fixed and moving features differ in shape: %s vs %s" %
                                    (self.fixedFeatures.shape, self.movingFeatures.shape))
        self.kind = MetricKind.fromName(kind)
        self.patch = patch
        self.box = box
        nz, ny, nx = self.fixedFeatures.shape[:3]
        if not all(0 <= a and b < d for a, b, d in zip(box.lo, box.hi, (nx, ny, nz))):
            raise ValueError("search box %s-%s does not fit the working grid %s" % (box.lo, box.hi, (nx, ny, nz)))

    @classmethod
    def fromVolumes(cls, I, J, box, kind=MetricKind.EA, patch=PatchSpec()):
        if not I.grid.sameAs(J.grid):
            raise GridMismatchError("fixed and moving volumes must share the working grid")
        return cls(metric_features(I, kind), metric_features(J, kind), box, kind, patch)

    @property
    def shape(self):
        return self.fixedFeatures.shape[:3]

    @property
    def dims(self):
        return self.shape[::-1]

    @property
    def searchWidth(self):
        return max(self.dims)

    def cost(self, center, shift):
        x, y, z = (int(c) for c in center)
        u, v, w = (int(s) for s in shift)
        return float(
            _patch_cost(self.fixedFeatures, self.movingFeatures, x, y, z, u, v, w, self.patch.radius, int(self.kind)))

    def fieldCost(self, V):
        return field_cost(self.fixedFeatures, self.movingFeatures, V, self.patch, self.kind)


def realization_rng(seed, realization_index):
    """ Counter-based stream keyed on (seed, realization index) """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(realization_index)])))


def search_radii(w, alpha):
    """ Random search radii w * alpha^i, for i = 0, 1, ... while the radius is at least one voxel """
    radii = []
    i = 0
    while w * alpha**i >= 1.:
        radii.append(w * alpha**i)
        i += 1
    return np.asarray(radii, dtype=np.float64)


def init_field(problem, rng):
    """ Random field whose targets r + V(r) are uniform over the search box.

    The grid dims and the search box are those of the problem; scores are computed.
    """
    box = problem.box
    r = voxel_coordinates(problem.shape)
    q = rng.integers(np.asarray(box.lo), np.asarray(box.hi), size=r.shape, endpoint=True, dtype=np.int64)
    V = q - r
    return ShiftField(V, problem.fieldCost(V))


@njit(cache=True, nogil=True)
def _sweep_plane(fi, fj, V, S, z, offsets, lo, hi, radius, kind, step):
    nz, ny, nx = V.shape[0], V.shape[1], V.shape[2]
    if step > 0:
        y0, y1, x0, x1 = 0, ny, 0, nx
    else:
        y0, y1, x0, x1 = ny - 1, -1, nx - 1, -1
    for y in range(y0, y1, step):
        for x in range(x0, x1, step):
            bu = V[z, y, x, 0]
            bv = V[z, y, x, 1]
            bw = V[z, y, x, 2]
            best = S[z, y, x]
            # Propagation from the neighbours visited before r
            for k in range(3):
                px, py, pz = x, y, z
                if k == 0:
                    px = x - step
                elif k == 1:
                    py = y - step
                else:
                    pz = z - step
                if px < 0 or px >= nx or py < 0 or py >= ny or pz < 0 or pz >= nz:
                    continue
                cu = V[pz, py, px, 0]
                cv = V[pz, py, px, 1]
                cw = V[pz, py, px, 2]
                if cu == bu and cv == bv and cw == bw:
                    continue
                tx, ty, tz = x + cu, y + cv, z + cw
                if tx < lo[0] or tx > hi[0] or ty < lo[1] or ty > hi[1] or tz < lo[2] or tz > hi[2]:
                    continue
                c = _patch_cost(fi, fj, x, y, z, cu, cv, cw, radius, kind)
                if c < best:
                    best = c
                    bu, bv, bw = cu, cv, cw
            # Random search around the incumbent
            for i in range(offsets.shape[2]):
                ou = offsets[y, x, i, 0]
                ov = offsets[y, x, i, 1]
                ow = offsets[y, x, i, 2]
                if ou == 0 and ov == 0 and ow == 0:
                    continue
                cu, cv, cw = bu + ou, bv + ov, bw + ow
                tx, ty, tz = x + cu, y + cv, z + cw
                if tx < lo[0] or tx > hi[0] or ty < lo[1] or ty > hi[1] or tz < lo[2] or tz > hi[2]:
                    continue
                c = _patch_cost(fi, fj, x, y, z, cu, cv, cw, radius, kind)
                if c < best:
                    best = c
                    bu, bv, bw = cu, cv, cw
            V[z, y, x, 0] = bu
            V[z, y, x, 1] = bv
            V[z, y, x, 2] = bw
            S[z, y, x] = best


def sweep(field, problem, params, rng, reverse=False):
    """ One full raster pass of propagation and random search.

    :param field: current ShiftField (left untouched)
    :param problem: PatchMatchProblem
    :param params: PMParams (alpha)
    :param rng: numpy Generator of the realization
    :param reverse: scan from the last voxel backwards and propagate from the +1 neighbours
    :return the updated ShiftField
    """
    out = field.copy()
    nz, ny, nx = problem.shape
    radii = search_radii(problem.searchWidth, params.alpha)
    lo = np.asarray(problem.box.lo, dtype=np.int64)
    hi = np.asarray(problem.box.hi, dtype=np.int64)
    step = -1 if reverse else 1
    planes = range(nz - 1, -1, -1) if reverse else range(nz)
    for z in planes:
        R = rng.uniform(-1., 1., size=(ny, nx, radii.size, 3))
        offsets = np.rint(radii[None, None, :, None] * R).astype(np.int64)
        _sweep_plane(problem.fixedFeatures, problem.movingFeatures, out.data, out.score, z, offsets, lo, hi,
                     problem.patch.radius, int(problem.kind), step)
    return out


class SolverPatchMatch:
    """ Runs one PatchMatch realization of a problem, reporting every sweep to its callbacks """
    def __init__(self, problem, params=None):
        self.problem = problem
        self.params = params if params is not None else PMParams()
        self.callbacks = None
        self.field = None
        self.iter = 0
        self.realization = 0
        self.elapsed = 0.

    def setCallbacks(self, callbacks):
        self.callbacks = list(callbacks)

    def getCallbacks(self):
        return self.callbacks

    def solve(self, realization_index=0, init=None):
        """ Initialize (unless a field is given) and run params.iterations sweeps.

        :param realization_index: index keying the random stream together with params.seed
        :param init: optional initial ShiftField
        :return final ShiftField
        """
        self.realization = realization_index
        rng = realization_rng(self.params.seed, realization_index)
        start = time.perf_counter()
        self.field = init_field(self.problem, rng) if init is None else init.copy()
        for i in range(self.params.iterations):
            reverse = self.params.alternate_scan and i % 2 == 1
            self.field = sweep(self.field, self.problem, self.params, rng, reverse)
            self.iter = i
            self.elapsed = time.perf_counter() - start
            if self.callbacks is not None:
                [c(self) for c in self.callbacks]
        return self.field


class CallbackVerbose:
    """ Logs one line per sweep """
    def __init__(self, level=logging.INFO):
        self.level = level

    def __call__(self, solver):
        score = solver.field.score
        logger.log(self.level, "realization %3d  iter %2d  mean score %.6g  elapsed %.3f s", solver.realization,
                   solver.iter, float(np.mean(score)), solver.elapsed)


class CallbackLogger:
    """ Records per-sweep statistics of every realization it observes """
    def __init__(self):
        self.realizations = []
        self.iters = []
        self.meanScores = []
        self.medianScores = []
        self.elapsed = []

    def __call__(self, solver):
        score = solver.field.score
        self.realizations.append(solver.realization)
        self.iters.append(solver.iter)
        self.meanScores.append(float(np.mean(score)))
        self.medianScores.append(float(np.median(score)))
        self.elapsed.append(solver.elapsed)


def run_realization(I, J, box, params, realization_index, callbacks=None):
    """ One PatchMatch realization of I against J, both already on the working grid """
    problem = PatchMatchProblem.fromVolumes(I, J, box, params.metric_kind, params.patch)
    return solve_problem(problem, params, realization_index, callbacks)


def solve_problem(problem, params, realization_index, callbacks=None):
    solver = SolverPatchMatch(problem, params)
    if callbacks:
        solver.setCallbacks(callbacks)
    return solver.solve(realization_index)


def run_realizations(problem, params, callbacks=None):
    """ params.realizations independent realizations, run on params.threads threads, in index order """
    indices = range(params.realizations)
    if params.threads == 1 or params.realizations == 1:
        return [solve_problem(problem, params, i, callbacks) for i in indices]
    with ThreadPoolExecutor(max_workers=params.threads) as pool:
        return list(pool.map(lambda i: solve_problem(problem, params, i, callbacks), indices))
