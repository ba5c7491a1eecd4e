"""
Synthetic multi-modal volume pairs with a known translation.

The scene is a body ellipsoid holding an organ ellipsoid with vessel (tube) and
lesion (sphere) structures, plus bright bone-like structures in the body. The
fixed image is the scene itself. The moving image renders the scene displaced
by the ground-truth shift through another intensity transfer, with optional
needle streaks, noise, a cylindrical field of view and a smaller box field of
view.
"""

import dataclasses
import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np
from scipy import ndimage

from .config import read_key_values, write_key_values
from .mask import BinaryMask
from .volume import Grid, Volume, translate

logger = logging.getLogger(__name__)

BODY_INTENSITY = 0.3
ORGAN_INTENSITY = 0.6
TRANSFERS = ("affine_gain_bias", "inverted", "gamma")


@dataclass(frozen=True)
class Structure:
    """ Sphere or tube; positions are offsets (x, y, z) in mm from the organ centre.

    A tube runs from center_mm to end_mm.
    """
    kind: str
    center_mm: Tuple[float, float, float]
    radius_mm: float
    intensity: float
    end_mm: Optional[Tuple[float, float, float]] = None

    def __post_init__(self):
        if self.kind not in ("sphere", "tube"):
            raise ValueError("unknown structure kind %r" % self.kind)
        if not self.radius_mm > 0.:
            raise ValueError("structure radius must be positive, got %r" % self.radius_mm)
        if self.kind == "tube" and self.end_mm is None:
            raise ValueError("a tube needs an end point")
        object.__setattr__(self, "center_mm", tuple(float(c) for c in self.center_mm))
        if self.end_mm is not None:
            object.__setattr__(self, "end_mm", tuple(float(c) for c in self.end_mm))

    def encode(self):
        values = [self.kind] + ["%r" % c for c in self.center_mm] + ["%r" % self.radius_mm, "%r" % self.intensity]
        if self.end_mm is not None:
            values += ["%r" % c for c in self.end_mm]
        return " ".join(values)

    @classmethod
    def decode(cls, text):
        tokens = text.split()
        if len(tokens) not in (6, 9):
            raise ValueError("malformed structure %r" % text)
        values = [float(t) for t in tokens[1:]]
        end = tuple(values[5:8]) if len(values) == 8 else None
        return cls(tokens[0], tuple(values[0:3]), values[3], values[4], end)


@dataclass(frozen=True)
class PhantomSpec:
    grid_dims: Tuple[int, int, int] = (192, 192, 192)
    spacing_mm: Tuple[float, float, float] = (1., 1., 1.)
    organ_center_mm: Optional[Tuple[float, float, float]] = None
    organ_radii_mm: Tuple[float, float, float] = (50., 38., 34.)
    body_radii_mm: Tuple[float, float, float] = (85., 62., 80.)
    structures: Tuple[Structure, ...] = ()
    truth_shift_mm: Tuple[float, float, float] = (0., 0., 0.)
    modality_b: str = "affine_gain_bias"
    gain: float = 1.
    bias: float = 0.
    gamma: float = 1.
    noise_sigma: float = 0.
    cylinder_fov_mm: Optional[float] = None
    needles: int = 0
    streaks_per_needle: int = 6
    streak_length_mm: float = 60.
    streak_intensity: float = 0.8
    crop_b: Tuple[Tuple[int, int], Tuple[int, int], Tuple[int, int]] = ((0, 0), (0, 0), (0, 0))
    blur_sigma_mm: float = 1.
    seed: int = 0

    def __post_init__(self):
        set_ = lambda name, value: object.__setattr__(self, name, value)  # noqa: E731
        set_("grid_dims", tuple(int(d) for d in self.grid_dims))
        set_("spacing_mm", tuple(float(s) for s in self.spacing_mm))
        set_("organ_radii_mm", tuple(float(r) for r in self.organ_radii_mm))
        set_("body_radii_mm", tuple(float(r) for r in self.body_radii_mm))
        set_("truth_shift_mm", tuple(float(t) for t in self.truth_shift_mm))
        set_("structures", tuple(self.structures))
        set_("crop_b", tuple((int(a), int(b)) for a, b in self.crop_b))
        if self.organ_center_mm is not None:
            set_("organ_center_mm", tuple(float(c) for c in self.organ_center_mm))
        if len(self.grid_dims) != 3 or any(d < 4 for d in self.grid_dims):
            raise ValueError("phantom grid needs at least 4 voxels per axis, got %s" % (self.grid_dims, ))
        if any(s <= 0. for s in self.spacing_mm):
            raise ValueError("phantom spacing must be positive, got %s" % (self.spacing_mm, ))
        if any(r <= 0. for r in self.organ_radii_mm + self.body_radii_mm):
            raise ValueError("organ and body radii must be positive")
        if self.modality_b not in TRANSFERS:
            raise ValueError("unknown transfer %r, expected one of %s" % (self.modality_b, ", ".join(TRANSFERS)))
        if not self.gamma > 0.:
            raise ValueError("gamma must be positive, got %r" % self.gamma)
        if self.noise_sigma < 0.:
            raise ValueError("noise_sigma must be non-negative, got %r" % self.noise_sigma)
        if self.blur_sigma_mm < 0.:
            raise ValueError("blur_sigma_mm must be non-negative, got %r" % self.blur_sigma_mm)
        if self.needles < 0 or self.streaks_per_needle < 0:
            raise ValueError("needle and streak counts must be non-negative")
        if self.cylinder_fov_mm is not None and not self.cylinder_fov_mm > 0.:
            raise ValueError("cylinder radius must be positive, got %r" % self.cylinder_fov_mm)
        extent = np.asarray(self.grid_dims) * np.asarray(self.spacing_mm)
        needed = 2. * np.asarray(self.organ_radii_mm) + np.abs(self.truth_shift_mm)
        if np.any(needed > extent):
            raise ValueError("grid extent %s mm cannot hold the organ plus the truth shift (%s mm)" %
                             (tuple(extent), tuple(needed)))
        for (a, b), d in zip(self.crop_b, self.grid_dims):
            if a < 0 or b < 0 or d - a - b < 2:
                raise ValueError("crop margins %s leave less than 2 voxels of %d" % ((a, b), d))

    @property
    def grid(self):
        return Grid(self.grid_dims, self.spacing_mm, (0., 0., 0.))

    @property
    def organCenter(self):
        if self.organ_center_mm is not None:
            return np.asarray(self.organ_center_mm)
        center = (np.asarray(self.grid_dims) - 1) * np.asarray(self.spacing_mm) / 2.
        return center - np.asarray(self.truth_shift_mm) / 2.

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    @classmethod
    def textured(cls, seed=0, vessels=6, lesions=5, bones=4, **overrides):
        """ Spec with randomized vessels, lesions and bones drawn from the seed """
        rng = np.random.default_rng(seed)
        base = cls(seed=seed, **overrides)
        radii = np.asarray(base.organ_radii_mm)
        structures = []
        for _ in range(vessels):
            start = rng.uniform(-0.6, 0.6, 3) * radii
            end = rng.uniform(-0.6, 0.6, 3) * radii
            structures.append(Structure("tube", start, rng.uniform(2.5, 5.), 0.25, end))
        for _ in range(lesions):
            structures.append(Structure("sphere", rng.uniform(-0.55, 0.55, 3) * radii, rng.uniform(4., 9.), -0.2))
        body = np.asarray(base.body_radii_mm)
        for _ in range(bones):
            angle = rng.uniform(0., 2. * np.pi)
            ring = 0.8 * np.array([body[0] * np.cos(angle), body[1] * np.sin(angle), 0.])
            start = ring + np.array([0., 0., rng.uniform(-0.5, 0.) * body[2]])
            end = ring + np.array([0., 0., rng.uniform(0., 0.5) * body[2]])
            structures.append(Structure("tube", start, rng.uniform(4., 7.), 0.6, end))
        return base.replace(structures=tuple(structures))


class PhantomPair(NamedTuple):
    fixed: Volume
    moving: Volume
    mask: BinaryMask
    truth_mm: Tuple[float, float, float]
    moving_mask: BinaryMask


def _axes(grid):
    """ World coordinate vectors broadcastable against arrays indexed [z, y, x] """
    x = grid.origin[0] + np.arange(grid.dims[0]) * grid.spacing[0]
    y = grid.origin[1] + np.arange(grid.dims[1]) * grid.spacing[1]
    z = grid.origin[2] + np.arange(grid.dims[2]) * grid.spacing[2]
    return x[None, None, :], y[None, :, None], z[:, None, None]


def ellipsoid(grid, center, radii):
    x, y, z = _axes(grid)
    return (((x - center[0]) / radii[0])**2 + ((y - center[1]) / radii[1])**2 +
            ((z - center[2]) / radii[2])**2) <= 1.


def sphere(grid, center, radius):
    return ellipsoid(grid, center, (radius, radius, radius))


def tube(grid, start, end, radius):
    """ Voxels within radius of the segment [start, end] """
    x, y, z = _axes(grid)
    start = np.asarray(start, dtype=np.float64)
    d = np.asarray(end, dtype=np.float64) - start
    length2 = float(d @ d)
    px, py, pz = x - start[0], y - start[1], z - start[2]
    if length2 == 0.:
        return px**2 + py**2 + pz**2 <= radius**2
    t = np.clip((px * d[0] + py * d[1] + pz * d[2]) / length2, 0., 1.)
    return (px - t * d[0])**2 + (py - t * d[1])**2 + (pz - t * d[2])**2 <= radius**2


def render_scene(spec, grid=None):
    """ Modality-A scene on the spec grid (or on grid): background 0, body, organ and structures """
    grid = spec.grid if grid is None else grid
    center = spec.organCenter
    scene = np.where(ellipsoid(grid, center, spec.body_radii_mm), BODY_INTENSITY, 0.)
    scene[ellipsoid(grid, center, spec.organ_radii_mm)] = ORGAN_INTENSITY
    for s in spec.structures:
        c = center + np.asarray(s.center_mm)
        if s.kind == "sphere":
            inside = sphere(grid, c, s.radius_mm)
        else:
            inside = tube(grid, c, center + np.asarray(s.end_mm), s.radius_mm)
        scene[inside] += s.intensity
    if spec.blur_sigma_mm > 0.:
        sigma = [spec.blur_sigma_mm / s for s in grid.spacing[::-1]]
        scene = ndimage.gaussian_filter(scene, sigma, mode="constant", cval=0.)
    return Volume.fromGrid(grid, scene)


def apply_transfer(values, spec):
    """ Modality-B intensity mapping of scene values """
    if spec.modality_b == "affine_gain_bias":
        return spec.gain * values + spec.bias
    if spec.modality_b == "inverted":
        return spec.gain * (-values) + spec.bias
    return spec.gain * np.power(np.clip(values, 0., None), spec.gamma) + spec.bias


def _drawSegment(data, grid, start, end, value):
    length = np.linalg.norm(np.asarray(end) - np.asarray(start))
    count = max(2, int(np.ceil(2. * length / min(grid.spacing))) + 1)
    points = np.linspace(start, end, count)
    idx = np.rint((points - np.asarray(grid.origin)) / np.asarray(grid.spacing)).astype(int)
    inside = np.all((idx >= 0) & (idx < np.asarray(grid.dims)), axis=1)
    idx = np.unique(idx[inside], axis=0)
    if idx.size:
        data[idx[:, 2], idx[:, 1], idx[:, 0]] += value


def add_streaks(data, spec, rng):
    """ Bright line segments through needle tips placed inside the displaced organ """
    grid = spec.grid
    center = spec.organCenter + np.asarray(spec.truth_shift_mm)
    radii = np.asarray(spec.organ_radii_mm)
    half = spec.streak_length_mm / 2.
    for _ in range(spec.needles):
        tip = center + rng.uniform(-0.5, 0.5, 3) * radii
        for _ in range(spec.streaks_per_needle):
            direction = rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            _drawSegment(data, grid, tip - half * direction, tip + half * direction, spec.streak_intensity)
    return data


def cylinder_support(grid, radius_mm):
    """ Cylinder of axis Z centred in the transverse plane of grid """
    x, y, _ = _axes(grid)
    cx = grid.origin[0] + (grid.dims[0] - 1) * grid.spacing[0] / 2.
    cy = grid.origin[1] + (grid.dims[1] - 1) * grid.spacing[1] / 2.
    inside = (x - cx)**2 + (y - cy)**2 <= radius_mm**2
    return np.broadcast_to(inside, grid.shape)


def crop_grid(grid, crop):
    (x0, x1), (y0, y1), (z0, z1) = crop
    dims = (grid.dims[0] - x0 - x1, grid.dims[1] - y0 - y1, grid.dims[2] - z0 - z1)
    origin = np.asarray(grid.origin) + np.asarray([x0, y0, z0]) * np.asarray(grid.spacing)
    return Grid(dims, grid.spacing, origin)


def _crop(data, crop):
    (x0, x1), (y0, y1), (z0, z1) = crop
    nz, ny, nx = data.shape
    return data[z0:nz - z1, y0:ny - y1, x0:nx - x1]


def render_moving(spec, scene=None):
    """ Moving image on the spec grid before streaks, noise and field-of-view limits.

    The transfer applies on the support of the displaced scene; the rest stays 0.
    """
    scene = render_scene(spec) if scene is None else scene
    moved = translate(scene, spec.truth_shift_mm).data.astype(np.float64)
    return np.where(moved > 0., apply_transfer(moved, spec), 0.)


def generate(spec):
    """ Render the fixed and moving images of spec.

    :return PhantomPair(fixed, moving, mask, truth_mm, moving_mask)
    """
    rng = np.random.default_rng(spec.seed)
    scene = render_scene(spec)
    moving = render_moving(spec, scene)
    if spec.needles:
        add_streaks(moving, spec, rng)
    if spec.noise_sigma > 0.:
        moving = moving + rng.normal(0., spec.noise_sigma, size=moving.shape)
    if spec.cylinder_fov_mm is not None:
        moving = np.where(cylinder_support(spec.grid, spec.cylinder_fov_mm), moving, 0.)

    grid = spec.grid
    center = spec.organCenter
    movingGrid = crop_grid(grid, spec.crop_b)
    mask = BinaryMask.fromGrid(grid, ellipsoid(grid, center, spec.organ_radii_mm))
    movingMask = BinaryMask.fromGrid(
        movingGrid, ellipsoid(movingGrid, center + np.asarray(spec.truth_shift_mm), spec.organ_radii_mm))
    logger.debug("phantom seed=%d truth=%s transfer=%s", spec.seed, spec.truth_shift_mm, spec.modality_b)
    return PhantomPair(scene, Volume.fromGrid(movingGrid, _crop(moving, spec.crop_b)), mask, spec.truth_shift_mm,
                       movingMask)


def sweep_specs(base, axis, values):
    """ Copies of base with field axis set to each value; seeds are offset by the item index """
    names = {f.name for f in dataclasses.fields(PhantomSpec)}
    if axis not in names:
        raise ValueError("unknown phantom parameter %r" % axis)
    return [base.replace(**{axis: v, "seed": base.seed + i}) if axis != "seed" else base.replace(seed=v)
            for i, v in enumerate(values)]


_VECTOR_KEYS = ("grid_dims", "spacing_mm", "organ_center_mm", "organ_radii_mm", "body_radii_mm", "truth_shift_mm")
_INT_KEYS = ("needles", "streaks_per_needle", "seed")
_FLOAT_KEYS = ("gain", "bias", "gamma", "noise_sigma", "cylinder_fov_mm", "streak_length_mm", "streak_intensity",
               "blur_sigma_mm")


def spec_items(spec):
    items = {}
    for f in dataclasses.fields(PhantomSpec):
        value = getattr(spec, f.name)
        if value is None:
            continue
        if f.name == "structures":
            for i, s in enumerate(value):
                items["structure_%d" % i] = s.encode()
        elif f.name == "crop_b":
            items[f.name] = " ".join("%d %d" % m for m in value)
        elif f.name in _VECTOR_KEYS:
            items[f.name] = " ".join(repr(v) for v in value)
        else:
            items[f.name] = repr(value) if isinstance(value, float) else str(value)
    return items


def save_phantom_spec(spec, path):
    write_key_values(path, spec_items(spec), "phantom")


def load_phantom_spec(path):
    items = read_key_values(path, "phantom")
    changes = {}
    structures = []
    for key, value in items.items():
        if key.startswith("structure_"):
            structures.append((int(key.split("_", 1)[1]), Structure.decode(value)))
        elif key == "crop_b":
            v = [int(t) for t in value.split()]
            if len(v) != 6:
                raise ValueError("crop_b needs 6 integers, got %r" % value)
            changes[key] = ((v[0], v[1]), (v[2], v[3]), (v[4], v[5]))
        elif key in _VECTOR_KEYS:
            changes[key] = tuple(float(t) for t in value.split())
        elif key in _INT_KEYS:
            changes[key] = int(value)
        elif key in _FLOAT_KEYS:
            changes[key] = float(value)
        elif key == "modality_b":
            changes[key] = value
        else:
            raise ValueError("unknown phantom parameter %r in %s" % (key, path))
    changes["structures"] = tuple(s for _, s in sorted(structures))
    return PhantomSpec(**changes)


def write_truth(path, truth_mm):
    with open(path, "w") as f:
        for a, t in zip("xyz", truth_mm):
            f.write("truth_%s_mm: %r\n" % (a, float(t)))


def read_truth(path):
    values = {}
    with open(path) as f:
        for line in f:
            if ":" in line:
                key, value = (s.strip() for s in line.split(":", 1))
                values[key] = value
    try:
        return tuple(float(values["truth_%s_mm" % a]) for a in "xyz")
    except KeyError as e:
        raise ValueError("truth file %s lacks %s" % (path, e.args[0]))
