"""
Scalar 3D volumes and the grid operations the field-of-view matching relies on.

Conventions used all over the package:
 * vectors describing the grid (dims, spacing, origin, shifts) are given in
   (x, y, z) order and millimeters;
 * sample arrays are C-ordered numpy arrays indexed [z, y, x], so X is the
   fastest axis as in the MetaImage files;
 * voxel i along an axis sits at world position origin + i * spacing.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np
from scipy import ndimage

from .exceptions import NonFiniteError, raiseIfNonFinite
from .metaimage import read_metaimage, write_metaimage

logger = logging.getLogger(__name__)

SCALAR_TYPE = np.float64


def _vector3(values, name, positive=False):
    values = tuple(float(v) for v in values)
    if len(values) != 3:
        raise ValueError("%s must hold 3 components, got %d" % (name, len(values)))
    if not all(math.isfinite(v) for v in values):
        raise ValueError("%s must be finite, got %s" % (name, values))
    if positive and not all(v > 0. for v in values):
        raise ValueError("%s must be strictly positive, got %s" % (name, values))
    return values


@dataclass(frozen=True)
class Grid:
    """ Sampling grid of a volume: voxel counts, voxel size and origin, all (x, y, z) """
    dims: Tuple[int, int, int]
    spacing: Tuple[float, float, float]
    origin: Tuple[float, float, float] = (0., 0., 0.)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or any(d <= 0 for d in dims):
            raise ValueError("grid dims must be 3 positive integers, got %s" % (self.dims, ))
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", _vector3(self.spacing, "spacing", positive=True))
        object.__setattr__(self, "origin", _vector3(self.origin, "origin"))

    @property
    def shape(self):
        """ numpy shape of the sample arrays, i.e. (nz, ny, nx) """
        return self.dims[::-1]

    @property
    def size(self):
        return self.dims[0] * self.dims[1] * self.dims[2]

    def extent(self):
        """ Physical box covered by the voxels: [origin, origin + dims * spacing) per axis """
        lo = np.asarray(self.origin)
        return lo, lo + np.asarray(self.dims) * np.asarray(self.spacing)

    def sameAs(self, other, tol=1e-9):
        return (self.dims == other.dims and np.allclose(self.spacing, other.spacing, rtol=0., atol=tol)
                and np.allclose(self.origin, other.origin, rtol=0., atol=tol))


@dataclass(frozen=True, eq=False)
class Volume:
    """ Immutable scalar volume.

    :param data: samples indexed [z, y, x], stored as float64
    :param spacing: voxel size (x, y, z) in mm
    :param origin: world position (x, y, z) in mm of voxel (0, 0, 0)
    """
    data: np.ndarray
    spacing: Tuple[float, float, float] = (1., 1., 1.)
    origin: Tuple[float, float, float] = (0., 0., 0.)
    grid: Grid = field(init=False, repr=False)

    def __post_init__(self):
        data = np.array(self.data, dtype=SCALAR_TYPE, order="C", copy=True)
        if data.ndim != 3:
            raise ValueError("volume data must be 3D, got %d dimensions" % data.ndim)
        raiseIfNonFinite(data, NonFiniteError("volume holds NaN or Inf samples"))
        data.setflags(write=False)
        grid = Grid(data.shape[::-1], self.spacing, self.origin)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", grid.spacing)
        object.__setattr__(self, "origin", grid.origin)
        object.__setattr__(self, "grid", grid)

    @property
    def dims(self):
        return self.grid.dims

    @classmethod
    def fromGrid(cls, grid, data=None):
        if data is None:
            data = np.zeros(grid.shape, dtype=SCALAR_TYPE)
        return cls(data, grid.spacing, grid.origin)

    def like(self, data):
        """ New volume sharing this grid """
        return Volume(data, self.spacing, self.origin)


@dataclass(frozen=True, eq=False)
class VectorField:
    """ Immutable field of 3-vectors (x, y, z components), data indexed [z, y, x, component] """
    data: np.ndarray
    spacing: Tuple[float, float, float] = (1., 1., 1.)
    origin: Tuple[float, float, float] = (0., 0., 0.)

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, order="C", copy=True)
        if data.ndim != 4 or data.shape[-1] != 3:
            raise ValueError("vector field data must be shaped (nz, ny, nx, 3), got %s" % (data.shape, ))
        raiseIfNonFinite(data, NonFiniteError("vector field holds NaN or Inf components"))
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", _vector3(self.spacing, "spacing", positive=True))
        object.__setattr__(self, "origin", _vector3(self.origin, "origin"))

    @property
    def dims(self):
        return self.data.shape[2::-1]


def load_volume(path):
    image = read_metaimage(path)
    return Volume(image.data.astype(SCALAR_TYPE), image.spacing, image.origin)


def save_volume(v, path):
    """ Write v as MET_FLOAT; samples are narrowed to float32 on disk """
    write_metaimage(path, v.data, v.spacing, v.origin)


def isotropic_grid(v, target_spacing):
    if not target_spacing > 0. or not math.isfinite(target_spacing):
        raise ValueError("target spacing must be positive, got %r" % target_spacing)
    dims = [int(math.ceil(d * s / target_spacing - 1e-9)) for d, s in zip(v.dims, v.spacing)]
    return Grid(dims, (target_spacing, ) * 3, v.origin)


def common_grid(volumes, target_spacing):
    """ Isotropic grid covering the union of the physical extents of the volumes.

    :param volumes: sequence of Volume (or BinaryMask) sharing a world frame
    :param target_spacing: voxel size of the common grid in mm
    """
    if not target_spacing > 0. or not math.isfinite(target_spacing):
        raise ValueError("target spacing must be positive, got %r" % target_spacing)
    if len(volumes) == 0:
        raise ValueError("at least one volume is needed to build a common grid")
    extents = [v.grid.extent() for v in volumes]
    lo = np.min([e[0] for e in extents], axis=0)
    hi = np.max([e[1] for e in extents], axis=0)
    dims = np.ceil((hi - lo) / target_spacing - 1e-9).astype(int)
    return Grid(dims, (target_spacing, ) * 3, lo)


def resample_array(data, source, grid, shift_mm=(0., 0., 0.), order=1):
    """ Sample an array living on `source` at the world positions p - shift of `grid`.

    Samples falling outside the source extent take the value 0.
    """
    scale = np.asarray(grid.spacing) / np.asarray(source.spacing)
    offset = (np.asarray(grid.origin) - np.asarray(shift_mm) - np.asarray(source.origin)) / np.asarray(source.spacing)
    return ndimage.affine_transform(np.asarray(data, dtype=SCALAR_TYPE),
                                    np.diag(scale[::-1]),
                                    offset=offset[::-1],
                                    output_shape=grid.shape,
                                    output=SCALAR_TYPE,
                                    order=order,
                                    mode="constant",
                                    cval=0.,
                                    prefilter=False)


def resample_to_grid(v, grid, shift_mm=(0., 0., 0.)):
    """ Trilinear resampling of v onto grid, optionally displaced by shift_mm.

    output(p) = v(p - shift_mm) for every voxel position p of the grid.
    """
    shift_mm = _vector3(shift_mm, "shift")
    if v.grid.sameAs(grid) and not any(shift_mm):
        return v
    return Volume.fromGrid(grid, resample_array(v.data, v.grid, grid, shift_mm))


def resample_isotropic(v, target_spacing):
    return resample_to_grid(v, isotropic_grid(v, target_spacing))


def translate(v, shift_mm):
    """ Displace the content of v by shift_mm, keeping its grid """
    return resample_to_grid(v, v.grid, _vector3(shift_mm, "shift"))


def _blockCounts(n, factor):
    counts = np.full(-(-n // factor), factor, dtype=np.float64)
    if n % factor:
        counts[-1] = n % factor
    return counts


def block_mean(data, factor):
    """ Mean of every factor^3 block, partial edge blocks averaging the available samples """
    data = np.asarray(data, dtype=np.float64)
    nz, ny, nx = data.shape
    pads = [(0, (-n) % factor) for n in data.shape]
    padded = np.pad(data, pads)
    mz, my, mx = (s // factor for s in padded.shape)
    sums = padded.reshape(mz, factor, my, factor, mx, factor).sum(axis=(1, 3, 5))
    counts = (_blockCounts(nz, factor)[:, None, None] * _blockCounts(ny, factor)[None, :, None] *
              _blockCounts(nx, factor)[None, None, :])
    return sums / counts


def downsampled_grid(grid, factor):
    # Block centres: the first output voxel sits in the middle of the first block
    spacing = np.asarray(grid.spacing) * factor
    origin = np.asarray(grid.origin) + 0.5 * (factor - 1) * np.asarray(grid.spacing)
    dims = [-(-d // factor) for d in grid.dims]
    return Grid(dims, spacing, origin)


def _checkFactor(factor):
    if int(factor) != factor or factor < 1:
        raise ValueError("down-sampling factor must be an integer >= 1, got %r" % factor)
    return int(factor)


def downsample(v, factor):
    factor = _checkFactor(factor)
    if factor == 1:
        return v
    return Volume.fromGrid(downsampled_grid(v.grid, factor), block_mean(v.data, factor))


def gradient(v):
    """ Spacing-normalized image gradient (intensity per mm).

    Central differences in the interior, one-sided differences on the borders.
    """
    if min(v.dims) < 2:
        raise ValueError("gradient needs at least 2 voxels per axis, got dims %s" % (v.dims, ))
    sx, sy, sz = v.spacing
    gz, gy, gx = np.gradient(v.data.astype(np.float64), sz, sy, sx, edge_order=1)
    return VectorField(np.stack([gx, gy, gz], axis=-1), v.spacing, v.origin)


def world_to_voxel(grid, points: Sequence[float]):
    return (np.asarray(points, dtype=np.float64) - np.asarray(grid.origin)) / np.asarray(grid.spacing)
