import numpy as np
from scipy import ndimage

from fovmatch import PhantomSpec, Volume

SCORE_TOLERANCE = 1e-9


class ShiftRecoveryException(Exception):
    """Raised when a recovered shift is too far from the ground truth"""
    pass


def assertShiftRecovered(estimated, truth, tolerance):
    """ Assert the per-axis error of a recovered shift.

    :param estimated: recovered shift (x, y, z) in mm
    :param truth: ground-truth shift (x, y, z) in mm
    :param tolerance: absolute tolerance in mm
    """
    error = np.abs(np.asarray(estimated) - np.asarray(truth))
    if np.any(error > tolerance):
        raise ShiftRecoveryException("shift %s too far from truth %s (error %s mm, tolerance %.4g mm)" %
                                     (tuple(estimated), tuple(truth), tuple(error), tolerance))


def texturedVolume(dims, seed=0, sigma=1.5, spacing=(1., 1., 1.), origin=(0., 0., 0.)):
    """ Smooth random texture; dims are (x, y, z) """
    rng = np.random.default_rng(seed)
    data = ndimage.gaussian_filter(rng.standard_normal(dims[::-1]), sigma, mode="wrap")
    return Volume(data, spacing, origin)


def rampVolume(dims, coefficients, spacing=(1., 1., 1.), origin=(0., 0., 0.)):
    """ Affine intensity c . p of the world position p (x, y, z) """
    z, y, x = np.indices(dims[::-1], dtype=np.float64)
    p = [origin[0] + x * spacing[0], origin[1] + y * spacing[1], origin[2] + z * spacing[2]]
    return Volume(sum(c * q for c, q in zip(coefficients, p)), spacing, origin)


def smallPhantomSpec(seed=0, **overrides):
    """ Textured phantom on a 96^3 grid at 2 mm """
    options = dict(grid_dims=(96, 96, 96), spacing_mm=(2., 2., 2.))
    options.update(overrides)
    return PhantomSpec.textured(seed, **options)
