import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from .exceptions import EmptyMaskError, GridMismatchError
from .mask import resample_mask_to_grid
from .volume import translate

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalReport:
    dsc_before: float
    dsc_after: float
    shift_error_mm: Optional[Tuple[float, float, float]] = None
    runtime_seconds: float = 0.

    def asDict(self):
        items = {"dsc_before": self.dsc_before, "dsc_after": self.dsc_after}
        if self.shift_error_mm is not None:
            for a, e in zip("xyz", self.shift_error_mm):
                items["shift_error_%s_mm" % a] = e
        items["runtime_seconds"] = self.runtime_seconds
        return items


def dice(a, b):
    """ Dice similarity coefficient 2|A and B| / (|A| + |B|) """
    if a.data.shape != b.data.shape:
        raise GridMismatchError("cannot compare masks of dims %s and %s" % (a.dims, b.dims))
    na = np.count_nonzero(a.data)
    nb = np.count_nonzero(b.data)
    if na + nb == 0:
        raise EmptyMaskError("dice is undefined for two empty masks")
    return 2. * np.count_nonzero(a.data & b.data) / (na + nb)


def _shiftVector(shift):
    return np.asarray(getattr(shift, "shift_mm", shift), dtype=np.float64)


def shift_error(estimated, truth_mm):
    """ Componentwise absolute difference in mm; estimated is a GlobalShift or a 3-vector """
    return tuple(float(e) for e in np.abs(_shiftVector(estimated) - _shiftVector(truth_mm)))


def align_moving(moving, shift):
    """ Moving volume resampled so that output(p) = moving(p + shift) """
    return translate(moving, -_shiftVector(shift))


def evaluate_alignment(fixed_mask, moving_mask, shift, truth=None, runtime=0.):
    """ DSC of the organ masks before and after applying the recovered shift.

    :param fixed_mask: organ mask on the fixed image
    :param moving_mask: organ mask on the moving image, any grid in the same world frame
    :param shift: GlobalShift or 3-vector in mm
    :param truth: optional ground-truth shift in mm
    :param runtime: seconds spent estimating the shift
    """
    before = resample_mask_to_grid(moving_mask, fixed_mask.grid)
    after = resample_mask_to_grid(moving_mask, fixed_mask.grid, -_shiftVector(shift))
    report = EvalReport(dsc_before=dice(fixed_mask, before),
                        dsc_after=dice(fixed_mask, after),
                        shift_error_mm=shift_error(shift, truth) if truth is not None else None,
                        runtime_seconds=float(runtime))
    logger.info("dsc before %.4f after %.4f", report.dsc_before, report.dsc_after)
    return report


def write_results_csv(rows, path):
    """ One row per case; rows are dicts sharing their keys """
    table = pd.DataFrame(list(rows))
    table.to_csv(path, index=False)
    return table
