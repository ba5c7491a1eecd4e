"""
From PatchMatch realizations to one global translation.

The realizations are merged voxelwise by a vector median, the merged shifts
inside the organ mask are tallied per axis in millimeter histograms and the
most populated bin of every axis gives the global shift.
"""

import dataclasses
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from .exceptions import EmptyMaskError, GridMismatchError
from .mask import SearchBox, downsample_mask, resample_mask_to_grid, search_box, support_mask
from .patchmatch import PatchMatchProblem, ShiftField, run_realizations
from .volume import common_grid, downsample, resample_to_grid

logger = logging.getLogger(__name__)

AXES = ("X", "Y", "Z")


@dataclass(frozen=True, eq=False)
class ShiftHistogram:
    axis: str
    lo: float
    hi: float
    bins: int
    counts: np.ndarray

    @property
    def width(self):
        return (self.hi - self.lo) / self.bins

    @property
    def centers(self):
        return self.lo + (np.arange(self.bins) + 0.5) * self.width

    @property
    def total(self):
        return int(self.counts.sum())


@dataclass(frozen=True, eq=False)
class GlobalShift:
    """ Estimated translation (x, y, z) in mm such that J(p + shift) matches I(p) """
    shift_mm: Tuple[float, float, float]
    per_axis_mode_count: Tuple[int, int, int]
    histograms: Tuple[ShiftHistogram, ShiftHistogram, ShiftHistogram]
    field: Optional[ShiftField] = None
    box: Optional[SearchBox] = None
    working_spacing_mm: Optional[Tuple[float, float, float]] = None
    realizations: int = 0


def median_field(realizations):
    """ Voxelwise vector median: the candidate minimizing the sum of Euclidean distances to all candidates.

    Ties go to the lowest realization index. Scores are not carried over.
    """
    if len(realizations) == 0:
        raise ValueError("median_field needs at least one realization")
    shape = realizations[0].data.shape
    for f in realizations[1:]:
        if f.data.shape != shape:
            raise GridMismatchError("realizations differ in dims: %s vs %s" % (shape, f.data.shape))
    if len(realizations) == 1:
        return ShiftField(realizations[0].data.copy())
    stack = np.stack([f.data for f in realizations]).astype(np.float64)
    sums = np.empty(stack.shape[:-1], dtype=np.float64)
    for j in range(stack.shape[0]):
        sums[j] = np.linalg.norm(stack - stack[j], axis=-1).sum(axis=0)
    best = np.argmin(sums, axis=0)
    data = np.take_along_axis(np.stack([f.data for f in realizations]), best[None, ..., None], axis=0)[0]
    return ShiftField(data)


def _histogram(values, axis, lo, hi, bins):
    counts, _ = np.histogram(np.clip(values, lo, hi), bins=bins, range=(lo, hi))
    return ShiftHistogram(axis, float(lo), float(hi), int(bins), counts.astype(np.int64))


def _checkMask(fields, mask):
    if mask.data.shape != fields[0].data.shape[:3]:
        raise GridMismatchError("mask dims %s differ from the shift field dims %s" % (mask.dims, fields[0].dims))
    if not mask.data.any():
        raise EmptyMaskError("the mask has no true voxel on the working grid")


def shift_histogram(field, mask, working_spacing_mm, lo, hi, bins):
    """ Per-axis histograms of the shifts (mm) at the true voxels of mask.

    Values outside [lo, hi] are clamped into the boundary bins.
    :return tuple of 3 ShiftHistogram (X, Y, Z)
    """
    return pooled_shift_histogram([field], mask, working_spacing_mm, lo, hi, bins)


def pooled_shift_histogram(fields, mask, working_spacing_mm, lo, hi, bins):
    """ shift_histogram tallied over several fields at once """
    _checkMask(fields, mask)
    spacing = np.broadcast_to(np.asarray(working_spacing_mm, dtype=np.float64), (3, ))
    shifts = np.concatenate([f.data[mask.data] for f in fields]) * spacing
    return tuple(_histogram(shifts[:, k], AXES[k], lo, hi, bins) for k in range(3))


def mode_shift(histograms):
    """ Centre of the most populated bin per axis; ties go to the smallest |centre|, then the lower centre """
    shift, modes = [], []
    for h in histograms:
        top = h.counts.max() if h.counts.size else 0
        if top <= 0:
            raise ValueError("histogram of axis %s is empty" % h.axis)
        candidates = h.centers[h.counts == top]
        shift.append(float(min(candidates, key=lambda c: (abs(c), c))))
        modes.append(int(top))
    return GlobalShift(tuple(shift), tuple(modes), tuple(histograms))


def prepare_working_grid(I, J, M, params):
    """ Resample I, J and M onto the common isotropic grid, then down-sample them """
    grid = common_grid([I, J], params.target_spacing_mm)
    Ir = downsample(resample_to_grid(I, grid), params.downsample_factor)
    Jr = downsample(resample_to_grid(J, grid), params.downsample_factor)
    Mr = downsample_mask(resample_mask_to_grid(M, grid), params.downsample_factor)
    logger.info("working grid dims=%s spacing=%s", Ir.dims, Ir.spacing)
    return Ir, Jr, Mr


def estimate_global_shift(I, J, M, params, callbacks=None):
    """ Global translation of the moving image J with respect to the fixed image I.

    :param I: fixed Volume
    :param J: moving Volume
    :param M: BinaryMask of the organ on I
    :param params: PMParams
    :param callbacks: optional solver callbacks, shared by every realization
    :return GlobalShift
    """
    Ir, Jr, Mr = prepare_working_grid(I, J, M, params)
    if not Mr.data.any():
        raise EmptyMaskError("the mask is empty after resampling onto the working grid")
    box = search_box(Mr, support_mask(Jr), params.box_margin)
    problem = PatchMatchProblem.fromVolumes(Ir, Jr, box, params.metric_kind, params.patch)
    fields = run_realizations(problem, params, callbacks)
    merged = median_field(fields)
    merged.score = problem.fieldCost(merged.data)
    lo, hi = params.bounds_mm
    if params.pooled_histogram:
        histograms = pooled_shift_histogram(fields, Mr, Ir.spacing, lo, hi, params.bins)
    else:
        histograms = shift_histogram(merged, Mr, Ir.spacing, lo, hi, params.bins)
    result = mode_shift(histograms)
    logger.info("estimated shift %s mm (mode counts %s)", result.shift_mm, result.per_axis_mode_count)
    return dataclasses.replace(result,
                               field=merged,
                               box=box,
                               working_spacing_mm=Ir.spacing,
                               realizations=len(fields))


def histogram_table(global_shift):
    rows = [{
        "axis": h.axis,
        "bin_center_mm": c,
        "count": int(n)
    } for h in global_shift.histograms for c, n in zip(h.centers, h.counts)]
    return pd.DataFrame(rows, columns=["axis", "bin_center_mm", "count"])


def write_histogram_csv(global_shift, path):
    histogram_table(global_shift).to_csv(path, index=False)


def format_report(global_shift, params, extra=None):
    """ key: value lines holding the shift, the mode counts, every parameter and the extra items """
    items = [("shift_%s_mm" % a.lower(), s) for a, s in zip(AXES, global_shift.shift_mm)]
    items += [("mode_count_%s" % a.lower(), n) for a, n in zip(AXES, global_shift.per_axis_mode_count)]
    items += list(params.asDict().items())
    if extra:
        items += list(extra.items())
    return "".join("%s: %s\n" % (k, _formatValue(v)) for k, v in items)


def _formatValue(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_report(path, global_shift, params, extra=None):
    with open(path, "w") as f:
        f.write(format_report(global_shift, params, extra))
