import sys
import unittest
import warnings

import numpy as np

from fovmatch import (Grid, NonFiniteError, Volume, common_grid, downsample, gradient, resample_isotropic,
                      resample_to_grid, translate)
from fovmatch.volume import downsampled_grid
from testutils import rampVolume, texturedVolume


class ResampleAbstractTestCase(unittest.TestCase):
    DIMS = None
    SPACING = None
    TARGET = 1.

    def setUp(self):
        if self.DIMS is None:
            self.skipTest("abstract test case")

    def interior(self, out):
        # output voxels strictly before the last source voxel centre on every axis
        limits = [(d - 1) * s for d, s in zip(self.DIMS, self.SPACING)]
        z, y, x = np.indices(out.data.shape)
        p = [x * out.spacing[0], y * out.spacing[1], z * out.spacing[2]]
        return np.all([q <= lim - 1e-6 for q, lim in zip(p, limits)], axis=0)

    def test_output_grid(self):
        v = Volume(np.zeros(self.DIMS[::-1]), self.SPACING, (1., -2., 3.))
        out = resample_isotropic(v, self.TARGET)
        expected = tuple(int(np.ceil(d * s / self.TARGET)) for d, s in zip(self.DIMS, self.SPACING))
        self.assertEqual(out.dims, expected, "Wrong resampled dims.")
        self.assertEqual(out.spacing, (self.TARGET, ) * 3, "Wrong resampled spacing.")
        self.assertEqual(out.origin, (1., -2., 3.), "Origin must be preserved.")

    def test_constant_volume(self):
        v = Volume(np.full(self.DIMS[::-1], 3.5), self.SPACING)
        out = resample_isotropic(v, self.TARGET)
        inside = self.interior(out)
        self.assertTrue(np.allclose(out.data[inside], 3.5, atol=1e-6), "Constant not preserved in the interior.")

    def test_ramp_volume(self):
        v = rampVolume(self.DIMS, (1., 0., 0.), self.SPACING)
        out = resample_isotropic(v, self.TARGET)
        inside = self.interior(out)
        x = np.broadcast_to(np.arange(out.dims[0]) * self.TARGET, out.data.shape)
        self.assertTrue(np.allclose(out.data[inside], x[inside], atol=1e-6), "Ramp not reproduced.")

    def test_no_warnings(self):
        v = texturedVolume(self.DIMS, spacing=self.SPACING)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            resample_isotropic(v, self.TARGET)
            translate(v, (0.5, -1., 0.25))
        self.assertEqual([str(w.message) for w in caught], [])

    def test_non_positive_target(self):
        v = Volume(np.zeros(self.DIMS[::-1]), self.SPACING)
        with self.assertRaises(ValueError):
            resample_isotropic(v, 0.)
        with self.assertRaises(ValueError):
            resample_isotropic(v, -1.)


class CoarseToFineResampleTest(ResampleAbstractTestCase):
    DIMS = (4, 4, 4)
    SPACING = (2., 2., 2.)


class AnisotropicResampleTest(ResampleAbstractTestCase):
    DIMS = (6, 7, 8)
    SPACING = (2., 1.5, 0.5)


class VolumeTest(unittest.TestCase):
    def test_invariants(self):
        with self.assertRaises(NonFiniteError):
            Volume(np.array([[[0., np.nan]]]))
        with self.assertRaises(ValueError):
            Volume(np.zeros((2, 2, 2)), (1., 0., 1.))
        with self.assertRaises(ValueError):
            Volume(np.zeros((2, 2)))
        v = Volume(np.zeros((2, 3, 4)), (1., 2., 3.))
        self.assertEqual(v.dims, (4, 3, 2), "dims must be (x, y, z).")
        self.assertFalse(v.data.flags.writeable, "Volume data must be read-only.")

    def test_common_grid(self):
        a = Volume(np.zeros((4, 4, 4)), (2., 2., 2.), (0., 0., 0.))
        b = Volume(np.zeros((3, 3, 3)), (1., 1., 1.), (-3., 5., 2.))
        grid = common_grid([a, b], 1.)
        self.assertEqual(grid.origin, (-3., 0., 0.))
        self.assertEqual(grid.dims, (11, 8, 8))
        self.assertTrue(common_grid([a], 1.).sameAs(resample_isotropic(a, 1.).grid),
                        "A single volume must give its isotropic grid.")

    def test_resample_to_same_grid(self):
        v = texturedVolume((5, 6, 7))
        self.assertTrue(np.array_equal(resample_to_grid(v, v.grid).data, v.data))


class DownsampleTest(unittest.TestCase):
    def test_identity(self):
        v = texturedVolume((5, 6, 7))
        self.assertTrue(np.array_equal(downsample(v, 1).data, v.data), "factor 1 must be the identity.")

    def test_block_mean(self):
        v = Volume(np.array([[[2., 4.]]]))
        out = downsample(v, 2)
        self.assertEqual(out.dims, (1, 1, 1))
        self.assertEqual(float(out.data[0, 0, 0]), 3.)
        self.assertEqual(out.spacing, (2., 2., 2.))

    def test_grid_arithmetic(self):
        grid = downsampled_grid(Grid((256, 256, 256), (1., 1., 1.)), 8)
        self.assertEqual(grid.dims, (32, 32, 32))
        self.assertEqual(grid.spacing, (8., 8., 8.))

    def test_partial_blocks(self):
        v = Volume(np.arange(30, dtype=float).reshape(2, 3, 5))
        out = downsample(v, 2)
        self.assertEqual(out.dims, (3, 2, 1))
        # last X block holds the single column x = 4 of the first 2 rows
        self.assertAlmostEqual(float(out.data[0, 0, 2]), np.mean(v.data[:, :2, 4]), 5)

    def test_global_mean(self):
        v = texturedVolume((8, 8, 8), seed=3)
        out = downsample(v, 4)
        self.assertAlmostEqual(float(np.mean(out.data, dtype=np.float64)), float(np.mean(v.data, dtype=np.float64)),
                               6)

    def test_invalid_factor(self):
        v = texturedVolume((4, 4, 4))
        with self.assertRaises(ValueError):
            downsample(v, 0)
        with self.assertRaises(ValueError):
            downsample(v, 1.5)


class GradientTest(unittest.TestCase):
    def test_constant(self):
        g = gradient(Volume(np.full((4, 5, 6), 2.)))
        self.assertTrue(np.all(g.data == 0.), "Gradient of a constant must vanish.")

    def test_ramp_x(self):
        spacing = (2., 1., 1.)
        g = gradient(rampVolume((6, 5, 4), (3., 0., 0.), spacing))
        self.assertTrue(np.allclose(g.data[1:-1, 1:-1, 1:-1], [3., 0., 0.], atol=1e-9))

    def test_affine_field(self):
        g = gradient(rampVolume((6, 6, 6), (1., 2., 4.)))
        # one-sided differences are exact as well on affine data
        self.assertTrue(np.allclose(g.data, [1., 2., 4.], atol=1e-9))
        self.assertEqual(g.data.shape, (6, 6, 6, 3))

    def test_affine_field_fractional_coefficients(self):
        c = (0.3, 0.7, 1.1)
        v = rampVolume((12, 11, 10), c, spacing=(0.7, 1.3, 0.9), origin=(-4.2, 10.1, 0.35))
        g = gradient(v)
        error = np.abs(g.data[1:-1, 1:-1, 1:-1] - np.asarray(c)).max()
        self.assertLessEqual(error, 1e-9, "Gradient of an affine field must equal its coefficients.")

    def test_too_small(self):
        with self.assertRaises(ValueError):
            gradient(Volume(np.zeros((1, 4, 4))))


class TranslateTest(unittest.TestCase):
    def test_zero_shift(self):
        v = texturedVolume((6, 6, 6))
        self.assertTrue(np.array_equal(translate(v, (0., 0., 0.)).data, v.data))

    def test_impulse(self):
        data = np.zeros((10, 10, 10))
        data[5, 5, 5] = 1.
        out = translate(Volume(data), (2., 0., 0.))
        self.assertEqual(float(out.data[5, 5, 7]), 1.)
        self.assertEqual(float(out.data.sum()), 1.)
        self.assertEqual(out.grid, Volume(data).grid, "Grid must be unchanged.")

    def test_integer_round_trip(self):
        v = texturedVolume((12, 12, 12), seed=1, spacing=(2., 2., 2.))
        s = np.array([4., -2., 6.])
        back = translate(translate(v, s), -s)
        inside = (slice(3, -3), ) * 3
        self.assertTrue(np.array_equal(back.data[inside], v.data[inside]), "Integer shifts must permute samples.")

    def test_constant_fractional(self):
        out = translate(Volume(np.full((8, 8, 8), 1.25)), (0.3, -1.7, 2.2))
        self.assertTrue(np.allclose(out.data[3:5, 3:5, 3:5], 1.25, atol=1e-6))

    def test_non_finite(self):
        v = texturedVolume((4, 4, 4))
        with self.assertRaises(ValueError):
            translate(v, (np.nan, 0., 0.))
        with self.assertRaises(ValueError):
            translate(v, (0., np.inf, 0.))


if __name__ == '__main__':
    test_classes_to_run = [
        CoarseToFineResampleTest, AnisotropicResampleTest, VolumeTest, DownsampleTest, GradientTest, TranslateTest
    ]
    loader = unittest.TestLoader()
    suites_list = []
    for test_class in test_classes_to_run:
        suite = loader.loadTestsFromTestCase(test_class)
        suites_list.append(suite)
    big_suite = unittest.TestSuite(suites_list)
    runner = unittest.TextTestRunner()
    results = runner.run(big_suite)
    sys.exit(not results.wasSuccessful())
