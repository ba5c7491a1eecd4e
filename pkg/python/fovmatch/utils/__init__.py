"""
Plain numpy/python reference implementations used to cross-check the compiled kernels.
"""

import math

import numpy as np
from scipy import ndimage

from ..metric import MetricKind
from ..patchmatch import ShiftField, search_radii, voxel_coordinates


def absmax(A):
    return np.max(np.abs(A))


class PatchMetricDerived:
    """ Patch distance written voxel by voxel

    :param kind: MetricKind
    :param radius: patch radius in voxels
    """
    def __init__(self, kind, radius):
        self.kind = MetricKind.fromName(kind)
        self.radius = radius

    def calc(self, fi, fj, center, shift):
        x, y, z = center
        u, v, w = shift
        num, den, count = 0., 0., 0
        for dz in range(-self.radius, self.radius + 1):
            for dy in range(-self.radius, self.radius + 1):
                for dx in range(-self.radius, self.radius + 1):
                    ri = (z + dz, y + dy, x + dx)
                    rj = (z + dz + w, y + dy + v, x + dx + u)
                    if not (all(0 <= a < n for a, n in zip(ri, fi.shape[:3]))
                            and all(0 <= a < n for a, n in zip(rj, fj.shape[:3]))):
                        continue
                    a, b = fi[ri], fj[rj]
                    if self.kind == MetricKind.EA:
                        dot, ni, nj = 0., 0., 0.
                        for c in range(a.size):
                            dot += a[c] * b[c]
                            ni += a[c] * a[c]
                            nj += b[c] * b[c]
                        num += abs(dot)
                        den += math.sqrt(ni * nj)
                    else:
                        d = a[0] - b[0]
                        num += d * d
                    count += 1
        if self.kind == MetricKind.EA:
            if count == 0 or den <= 0.:
                return 0.
            return max(-num / den, -1.)
        if count == 0:
            return math.inf
        return num / count

    def costMap(self, fi, fj, shift):
        """ Distance at every voxel for one constant shift, with box sums over zero-padded products """
        u, v, w = shift
        nz, ny, nx = fi.shape[:3]
        shifted = np.zeros_like(fi)
        valid = np.zeros(fi.shape[:3])
        src = tuple(slice(max(0, s), min(n, n + s)) for s, n in zip((w, v, u), (nz, ny, nx)))
        dst = tuple(slice(max(0, -s), min(n, n - s)) for s, n in zip((w, v, u), (nz, ny, nx)))
        shifted[dst] = fj[src]
        valid[dst] = 1.
        edge = 2 * self.radius + 1
        boxSum = lambda a: ndimage.uniform_filter(a, edge, mode="constant", cval=0.) * edge**3  # noqa: E731
        if self.kind == MetricKind.EA:
            num = boxSum(np.abs(np.sum(fi * shifted, axis=-1)))
            den = boxSum(np.linalg.norm(fi, axis=-1) * np.linalg.norm(shifted, axis=-1))
            with np.errstate(invalid="ignore", divide="ignore"):
                return np.where(den > 1e-12, np.maximum(-num / den, -1.), 0.)
        count = np.rint(boxSum(valid))
        sq = boxSum((fi[..., 0] - shifted[..., 0])**2 * valid)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(count > 0, sq / np.maximum(count, 1.), np.inf)

    def bruteForce(self, fi, fj, box):
        """ Best distance at every voxel over all shifts whose target lies in the search box """
        shape = fi.shape[:3]
        r = voxel_coordinates(shape)
        best = np.full(shape, np.inf)
        lo, hi = np.asarray(box.lo), np.asarray(box.hi)
        dims = np.asarray(shape[::-1])
        for w in range(lo[2] - dims[2] + 1, hi[2] + 1):
            for v in range(lo[1] - dims[1] + 1, hi[1] + 1):
                for u in range(lo[0] - dims[0] + 1, hi[0] + 1):
                    s = np.array([u, v, w])
                    feasible = box.contains(r + s)
                    if not feasible.any():
                        continue
                    cost = self.costMap(fi, fj, (u, v, w))
                    best = np.where(feasible, np.minimum(best, cost), best)
        return best


def vectorMedianDerived(candidates):
    """ Candidate minimizing the sum of Euclidean distances to all candidates, first one on ties """
    candidates = [np.asarray(c, dtype=np.float64) for c in candidates]
    sums = [sum(np.linalg.norm(c - d) for d in candidates) for c in candidates]
    return candidates[int(np.argmin(sums))]


class SolverPatchMatchDerived:
    """ Pure python PatchMatch consuming the random stream exactly as the compiled solver does """
    def __init__(self, problem, params):
        self.problem = problem
        self.params = params
        self.metric = PatchMetricDerived(problem.kind, problem.patch.radius)

    def cost(self, x, y, z, u, v, w):
        return self.metric.calc(self.problem.fixedFeatures, self.problem.movingFeatures, (x, y, z), (u, v, w))

    def inBox(self, x, y, z, u, v, w):
        lo, hi = self.problem.box.lo, self.problem.box.hi
        return all(a <= t <= b for t, a, b in zip((x + u, y + v, z + w), lo, hi))

    def initField(self, rng):
        box = self.problem.box
        r = voxel_coordinates(self.problem.shape)
        q = rng.integers(np.asarray(box.lo), np.asarray(box.hi), size=r.shape, endpoint=True, dtype=np.int64)
        V = q - r
        S = np.empty(self.problem.shape)
        for z, y, x in np.ndindex(*self.problem.shape):
            S[z, y, x] = self.cost(x, y, z, *V[z, y, x])
        return ShiftField(V, S)

    def sweep(self, field, rng, reverse=False):
        V, S = field.data.copy(), field.score.copy()
        nz, ny, nx = self.problem.shape
        radii = search_radii(self.problem.searchWidth, self.params.alpha)
        step = -1 if reverse else 1
        for z in (range(nz - 1, -1, -1) if reverse else range(nz)):
            R = rng.uniform(-1., 1., size=(ny, nx, radii.size, 3))
            for y in (range(ny - 1, -1, -1) if reverse else range(ny)):
                for x in (range(nx - 1, -1, -1) if reverse else range(nx)):
                    best, cur = S[z, y, x], tuple(int(c) for c in V[z, y, x])
                    for p in ((x - step, y, z), (x, y - step, z), (x, y, z - step)):
                        if not (0 <= p[0] < nx and 0 <= p[1] < ny and 0 <= p[2] < nz):
                            continue
                        cand = tuple(int(c) for c in V[p[2], p[1], p[0]])
                        if cand == cur or not self.inBox(x, y, z, *cand):
                            continue
                        c = self.cost(x, y, z, *cand)
                        if c < best:
                            best, cur = c, cand
                    for i in range(radii.size):
                        off = tuple(int(o) for o in np.rint(radii[i] * R[y, x, i]))
                        if off == (0, 0, 0):
                            continue
                        cand = (cur[0] + off[0], cur[1] + off[1], cur[2] + off[2])
                        if not self.inBox(x, y, z, *cand):
                            continue
                        c = self.cost(x, y, z, *cand)
                        if c < best:
                            best, cur = c, cand
                    V[z, y, x] = cur
                    S[z, y, x] = best
        return ShiftField(V, S)

    def solve(self, rng):
        field = self.initField(rng)
        for i in range(self.params.iterations):
            field = self.sweep(field, rng, self.params.alternate_scan and i % 2 == 1)
        return field
