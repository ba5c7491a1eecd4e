"""
Binary organ masks and the search box bounding the PatchMatch candidates.
"""

import logging
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy import ndimage

from .exceptions import EmptyMaskError, GridMismatchError
from .metaimage import read_metaimage, write_metaimage
from .volume import Grid, _checkFactor, block_mean, downsampled_grid, resample_array

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """ Immutable boolean volume, data indexed [z, y, x] """
    data: np.ndarray
    spacing: Tuple[float, float, float] = (1., 1., 1.)
    origin: Tuple[float, float, float] = (0., 0., 0.)
    grid: Grid = field(init=False, repr=False)

    def __post_init__(self):
        data = np.array(self.data, dtype=bool, order="C", copy=True)
        if data.ndim != 3:
            raise ValueError("mask data must be 3D, got %d dimensions" % data.ndim)
        data.setflags(write=False)
        grid = Grid(data.shape[::-1], self.spacing, self.origin)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", grid.spacing)
        object.__setattr__(self, "origin", grid.origin)
        object.__setattr__(self, "grid", grid)

    @property
    def dims(self):
        return self.grid.dims

    @property
    def count(self):
        return int(np.count_nonzero(self.data))

    @classmethod
    def fromGrid(cls, grid, data=None):
        if data is None:
            data = np.zeros(grid.shape, dtype=bool)
        return cls(data, grid.spacing, grid.origin)

    def like(self, data):
        return BinaryMask(data, self.spacing, self.origin)


@dataclass(frozen=True)
class SearchBox:
    """ Inclusive voxel bounds (x, y, z) on the working grid """
    lo: Tuple[int, int, int]
    hi: Tuple[int, int, int]

    def __post_init__(self):
        lo = tuple(int(v) for v in self.lo)
        hi = tuple(int(v) for v in self.hi)
        if len(lo) != 3 or len(hi) != 3:
            raise ValueError("search box bounds must have 3 components")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError("empty search box: lo=%s hi=%s" % (lo, hi))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def size(self):
        return tuple(b - a + 1 for a, b in zip(self.lo, self.hi))

    def contains(self, points):
        """ Elementwise membership test of (..., 3) voxel coordinates given as (x, y, z) """
        points = np.asarray(points)
        return np.all((points >= np.asarray(self.lo)) & (points <= np.asarray(self.hi)), axis=-1)

    def insideGrid(self, grid):
        return all(a >= 0 and b < d for a, b, d in zip(self.lo, self.hi, grid.dims))


def support_mask(v):
    """ Nonzero support of a volume """
    return BinaryMask(v.data != 0, v.spacing, v.origin)


def threshold_mask(v, t):
    return BinaryMask(v.data > t, v.spacing, v.origin)


def load_mask(path):
    image = read_metaimage(path)
    return BinaryMask(image.data != 0, image.spacing, image.origin)


def save_mask(m, path):
    write_metaimage(path, m.data.astype(np.float32), m.spacing, m.origin)


def _structure(kernel_edge):
    if int(kernel_edge) != kernel_edge or kernel_edge < 1 or kernel_edge % 2 == 0:
        raise ValueError("kernel edge must be an odd positive integer, got %r" % kernel_edge)
    return np.ones((int(kernel_edge), ) * 3, dtype=bool)


def _checkIterations(iterations):
    if int(iterations) != iterations or iterations < 1:
        raise ValueError("morphology iterations must be a positive integer, got %r" % iterations)
    return int(iterations)


def erode(m, kernel_edge, iterations=1):
    """ Binary erosion with a cubic structuring element; outside the grid counts as false.

    :param m: mask
    :param kernel_edge: odd edge of the cubic kernel in voxels
    :param iterations: number of successive erosions
    """
    structure = _structure(kernel_edge)
    iterations = _checkIterations(iterations)
    data = ndimage.binary_erosion(m.data, structure=structure, iterations=iterations, border_value=0)
    return m.like(data)


def dilate(m, kernel_edge, iterations=1):
    """ Binary dilation with a cubic structuring element, see erode """
    structure = _structure(kernel_edge)
    iterations = _checkIterations(iterations)
    data = ndimage.binary_dilation(m.data, structure=structure, iterations=iterations, border_value=0)
    return m.like(data)


def adjust_mask(m, steps, kernel_edge=5):
    """ Erode (steps < 0) or dilate (steps > 0) |steps| times """
    if steps == 0:
        return m
    if steps < 0:
        return erode(m, kernel_edge, -steps)
    return dilate(m, kernel_edge, steps)


def resample_mask_to_grid(m, grid, shift_mm=(0., 0., 0.)):
    """ Trilinear sampling of the mask indicator at p - shift_mm, thresholded at 0.5 """
    if m.grid.sameAs(grid) and not any(shift_mm):
        return m
    values = resample_array(m.data.astype(np.float64), m.grid, grid, shift_mm)
    return BinaryMask.fromGrid(grid, values >= 0.5)


def downsample_mask(m, factor):
    factor = _checkFactor(factor)
    if factor == 1:
        return m
    return BinaryMask.fromGrid(downsampled_grid(m.grid, factor), block_mean(m.data, factor) >= 0.5)


def search_box(mask, j_support, margin=0):
    """ Tightest box holding every true voxel of mask and of the moving image support.

    :param mask: organ mask on the working grid
    :param j_support: nonzero support of the moving image on the same grid
    :param margin: extra voxels added on every side, clipped to the grid
    :return SearchBox in (x, y, z) voxel coordinates
    """
    if not mask.grid.sameAs(j_support.grid):
        raise GridMismatchError("mask and moving support must share the working grid")
    if int(margin) != margin or margin < 0:
        raise ValueError("search box margin must be a non-negative integer, got %r" % margin)
    union = mask.data | j_support.data
    if not union.any():
        raise EmptyMaskError("the union of the mask and the moving image support is empty")
    lo, hi = [], []
    # Reduce to 1D projections per axis; data is [z, y, x]
    for axis in (2, 1, 0):
        others = tuple(a for a in range(3) if a != axis)
        nonzero = np.flatnonzero(union.any(axis=others))
        lo.append(nonzero[0])
        hi.append(nonzero[-1])
    dims = mask.dims
    lo = [max(0, int(a) - int(margin)) for a in lo]
    hi = [min(d - 1, int(b) + int(margin)) for b, d in zip(hi, dims)]
    box = SearchBox(lo, hi)
    logger.debug("search box lo=%s hi=%s on grid %s", box.lo, box.hi, dims)
    return box
