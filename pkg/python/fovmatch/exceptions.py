import numpy as np


class FovMatchError(Exception):
    """Base class of every error raised by fovmatch"""
    pass


class VolumeFormatError(FovMatchError, ValueError):
    """Raised when a MetaImage header or its raw data cannot be interpreted"""
    pass


class EmptyMaskError(FovMatchError, ValueError):
    """Raised when a mask (or a union of supports) has no true voxel"""
    pass


class GridMismatchError(FovMatchError, ValueError):
    """Raised when two fields are expected to share the same grid"""
    pass


class NonFiniteError(FovMatchError, ArithmeticError):
    """Raised when NaN or Inf samples reach a volume"""
    pass


def raiseIfNonFinite(A, error=None):
    if error is None:
        error = NonFiniteError("NaN or Inf in array")
    if not np.all(np.isfinite(A)):
        raise error
