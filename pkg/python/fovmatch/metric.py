"""
Patch distances between a fixed image I and a moving image J.

Both distances are evaluated by compiled kernels on per-voxel feature arrays
shaped (nz, ny, nx, c): image gradients (c = 3) for the edge-alignment
distance and raw intensities (c = 1) for the L2 distance. Patches partially
leaving a grid are scored over the in-grid overlap only.
"""

import enum
import logging
from dataclasses import dataclass

import numpy as np
from numba import njit

from .volume import gradient

logger = logging.getLogger(__name__)


class MetricKind(enum.IntEnum):
    EA = 0
    L2 = 1

    @classmethod
    def fromName(cls, name):
        if isinstance(name, cls):
            return name
        try:
            return cls[str(name).strip().upper()]
        except KeyError:
            raise ValueError("unknown metric %r, expected one of %s" %
                             (name, ", ".join(k.name.lower() for k in cls)))


@dataclass(frozen=True)
class PatchSpec:
    """ Cubic patch of edge 2 * radius + 1 voxels """
    radius: int = 4

    def __post_init__(self):
        if int(self.radius) != self.radius or self.radius < 0:
            raise ValueError("patch radius must be a non-negative integer, got %r" % self.radius)
        object.__setattr__(self, "radius", int(self.radius))

    @property
    def edge(self):
        return 2 * self.radius + 1

    @classmethod
    def fromEdge(cls, edge):
        if int(edge) != edge or edge < 1 or edge % 2 == 0:
            raise ValueError("patch edge must be an odd positive integer, got %r" % edge)
        return cls((int(edge) - 1) // 2)


@njit(cache=True, nogil=True)
def _patch_cost(fi, fj, x, y, z, u, v, w, radius, kind):
    nz, ny, nx, nc = fi.shape
    mz, my, mx = fj.shape[0], fj.shape[1], fj.shape[2]
    num = 0.
    den = 0.
    count = 0
    for dz in range(-radius, radius + 1):
        zi = z + dz
        zj = zi + w
        if zi < 0 or zi >= nz or zj < 0 or zj >= mz:
            continue
        for dy in range(-radius, radius + 1):
            yi = y + dy
            yj = yi + v
            if yi < 0 or yi >= ny or yj < 0 or yj >= my:
                continue
            for dx in range(-radius, radius + 1):
                xi = x + dx
                xj = xi + u
                if xi < 0 or xi >= nx or xj < 0 or xj >= mx:
                    continue
                if kind == 0:
                    dot = 0.
                    ni = 0.
                    nj = 0.
                    for c in range(nc):
                        a = fi[zi, yi, xi, c]
                        b = fj[zj, yj, xj, c]
                        dot += a * b
                        ni += a * a
                        nj += b * b
                    num += abs(dot)
                    den += np.sqrt(ni * nj)
                else:
                    d = fi[zi, yi, xi, 0] - fj[zj, yj, xj, 0]
                    num += d * d
                count += 1
    if kind == 0:
        if count == 0 or den <= 0.:
            return 0.
        return max(-num / den, -1.)
    if count == 0:
        return np.inf
    return num / count


@njit(cache=True, nogil=True)
def _field_cost(fi, fj, V, radius, kind, out):
    nz, ny, nx = V.shape[0], V.shape[1], V.shape[2]
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                out[z, y, x] = _patch_cost(fi, fj, x, y, z, V[z, y, x, 0], V[z, y, x, 1], V[z, y, x, 2], radius,
                                           kind)
    return out


def metric_features(volume, kind):
    """ Feature array consumed by the compiled kernels.

    :param volume: Volume
    :param kind: MetricKind
    :return float64 array (nz, ny, nx, 3) of gradients for EA, (nz, ny, nx, 1) of intensities for L2
    """
    kind = MetricKind.fromName(kind)
    if kind == MetricKind.EA:
        return np.ascontiguousarray(gradient(volume).data)
    return np.ascontiguousarray(volume.data, dtype=np.float64)[..., None]


def patch_cost(fi, fj, center, shift, patch, kind):
    """ Distance between the patch of fi at center and the patch of fj at center + shift.

    center and shift are (x, y, z) voxel vectors.
    """
    x, y, z = (int(c) for c in center)
    nz, ny, nx = fi.shape[:3]
    if not (0 <= x < nx and 0 <= y < ny and 0 <= z < nz):
        raise ValueError("patch center %s outside grid of dims %s" % (tuple(center), (nx, ny, nz)))
    u, v, w = (int(s) for s in shift)
    return float(_patch_cost(fi, fj, x, y, z, u, v, w, patch.radius, int(MetricKind.fromName(kind))))


def field_cost(fi, fj, V, patch, kind):
    """ Patch distance at every voxel for the shift field V (nz, ny, nx, 3) """
    out = np.empty(V.shape[:3], dtype=np.float64)
    return _field_cost(fi, fj, np.ascontiguousarray(V, dtype=np.int64), patch.radius, int(MetricKind.fromName(kind)),
                       out)


def ea_distance(gI, gJ, center, shift, patch):
    """ Edge-alignment distance in [-1, 0].

    -sum |gI(r).gJ(r+shift)| / sum |gI(r)||gJ(r+shift)| over the patch overlap; 0 for flat or empty overlaps.
    :param gI: VectorField gradient of the fixed image
    :param gJ: VectorField gradient of the moving image
    :param center: voxel (x, y, z) in gI's grid
    :param shift: integer voxel shift (u, v, w)
    :param patch: PatchSpec
    """
    return patch_cost(gI.data, gJ.data, center, shift, patch, MetricKind.EA)


def l2_distance(I, J, center, shift, patch):
    """ Mean squared intensity difference over the patch overlap; +inf for an empty overlap """
    return patch_cost(metric_features(I, MetricKind.L2), metric_features(J, MetricKind.L2), center, shift, patch,
                      MetricKind.L2)
