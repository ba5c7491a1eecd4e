"""
fovmatch: global field-of-view matching of multi-modal 3D volumes by PatchMatch under an edge-alignment metric.
"""

from .aggregate import (GlobalShift, ShiftHistogram, estimate_global_shift, format_report, median_field, mode_shift,
                        pooled_shift_histogram, shift_histogram, write_histogram_csv, write_report)
from .evaluation import EvalReport, align_moving, dice, evaluate_alignment, shift_error, write_results_csv
from .exceptions import EmptyMaskError, FovMatchError, GridMismatchError, NonFiniteError, VolumeFormatError
from .mask import (BinaryMask, SearchBox, adjust_mask, dilate, downsample_mask, erode, load_mask,
                   resample_mask_to_grid, save_mask, search_box, support_mask, threshold_mask)
from .metric import MetricKind, PatchSpec, ea_distance, l2_distance, metric_features
from .patchmatch import (CallbackLogger, CallbackVerbose, PatchMatchProblem, PMParams, ShiftField, SolverPatchMatch,
                         init_field, run_realization, run_realizations, sweep)
from .phantom import PhantomPair, PhantomSpec, Structure, generate, sweep_specs
from .volume import (Grid, Volume, VectorField, common_grid, downsample, gradient, load_volume, resample_isotropic,
                     resample_to_grid, save_volume, translate)

__version__ = "1.0.0"
