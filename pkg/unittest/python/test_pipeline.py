import sys
import unittest

import numpy as np

from fovmatch import (BinaryMask, CallbackLogger, EmptyMaskError, PhantomSpec, PMParams, estimate_global_shift,
                      evaluate_alignment, generate, translate)
from fovmatch.aggregate import prepare_working_grid
from testutils import assertShiftRecovered, smallPhantomSpec

TOLERANCE_MM = 12.
BIN_WIDTH_MM = 4.


def workingParams(**changes):
    """ 8 mm working voxels on the 96^3 phantoms at 2 mm, as DS-8 does on 192^3 at 1 mm """
    options = dict(target_spacing_mm=2., downsample_factor=4, threads=4)
    options.update(changes)
    return PMParams(**options)


class RecoveryAbstractTestCase(unittest.TestCase):
    TRANSFER = None
    TRUTH = (24., -16., 8.)
    SEED = 0
    GAIN = 1.5
    BIAS = 0.1

    def setUp(self):
        if self.TRANSFER is None:
            self.skipTest("abstract test case")
        spec = smallPhantomSpec(seed=self.SEED, truth_shift_mm=self.TRUTH, modality_b=self.TRANSFER, gain=self.GAIN,
                                bias=self.BIAS, gamma=0.5)
        self.pair = generate(spec)

    def test_recover_shift(self):
        result = estimate_global_shift(self.pair.fixed, self.pair.moving, self.pair.mask, workingParams())
        assertShiftRecovered(result.shift_mm, self.TRUTH, TOLERANCE_MM)
        report = evaluate_alignment(self.pair.mask, self.pair.moving_mask, result)
        self.assertGreater(report.dsc_after, report.dsc_before)
        self.assertGreaterEqual(report.dsc_after, 0.8)


class AffineRecoveryTest(RecoveryAbstractTestCase):
    TRANSFER = "affine_gain_bias"


class GammaRecoveryTest(RecoveryAbstractTestCase):
    TRANSFER = "gamma"
    TRUTH = (-40., 8., 32.)
    SEED = 1


class InvertedRecoveryTest(RecoveryAbstractTestCase):
    TRANSFER = "inverted"
    TRUTH = (16., 24., -24.)
    SEED = 2
    BIAS = 1.

    def test_edge_alignment_beats_l2(self):
        ea = estimate_global_shift(self.pair.fixed, self.pair.moving, self.pair.mask, workingParams())
        l2 = estimate_global_shift(self.pair.fixed, self.pair.moving, self.pair.mask, workingParams(metric_kind="l2"))
        dscEA = evaluate_alignment(self.pair.mask, self.pair.moving_mask, ea).dsc_after
        dscL2 = evaluate_alignment(self.pair.mask, self.pair.moving_mask, l2).dsc_after
        self.assertLess(dscL2, dscEA, "L2 must align worse than edge alignment under contrast reversal.")


class PipelineTest(unittest.TestCase):
    def setUp(self):
        self.pair = generate(smallPhantomSpec(seed=3, truth_shift_mm=(24., -16., 8.), gain=1.5, bias=0.1))

    def test_self_alignment(self):
        I = self.pair.fixed
        result = estimate_global_shift(I, I, self.pair.mask, workingParams())
        for s in result.shift_mm:
            self.assertTrue(s - BIN_WIDTH_MM / 2. <= 0. < s + BIN_WIDTH_MM / 2., "The mode bin must contain 0.")

    def test_determinism(self):
        params = workingParams(realizations=4)
        a = estimate_global_shift(self.pair.fixed, self.pair.moving, self.pair.mask, params)
        b = estimate_global_shift(self.pair.fixed, self.pair.moving, self.pair.mask, params.replace(threads=1))
        self.assertEqual(a.shift_mm, b.shift_mm)
        self.assertTrue(np.array_equal(a.field.data, b.field.data))
        for ha, hb in zip(a.histograms, b.histograms):
            self.assertTrue(np.array_equal(ha.counts, hb.counts))

    def test_diagnostics(self):
        logger = CallbackLogger()
        params = workingParams(realizations=3, iterations=2)
        result = estimate_global_shift(self.pair.fixed, self.pair.moving, self.pair.mask, params, [logger])
        self.assertEqual(len(logger.iters), 6)
        self.assertEqual(result.realizations, 3)
        self.assertEqual(result.working_spacing_mm, (8., 8., 8.))
        self.assertEqual(result.field.dims, (24, 24, 24))
        self.assertTrue(np.all(np.isfinite(result.field.score)))
        _, _, Mr = prepare_working_grid(self.pair.fixed, self.pair.moving, self.pair.mask, params)
        for h in result.histograms:
            self.assertEqual(h.total, Mr.count, "Histogram total must equal the mask cardinality.")

    def test_pooled_histogram(self):
        params = workingParams(pooled_histogram=True)
        result = estimate_global_shift(self.pair.fixed, self.pair.moving, self.pair.mask, params)
        assertShiftRecovered(result.shift_mm, self.pair.truth_mm, TOLERANCE_MM)
        _, _, Mr = prepare_working_grid(self.pair.fixed, self.pair.moving, self.pair.mask, params)
        for h in result.histograms:
            self.assertEqual(h.total, params.realizations * Mr.count)

    def test_translated_moving(self):
        t = (16., 0., -8.)
        params = workingParams()
        base = estimate_global_shift(self.pair.fixed, self.pair.moving, self.pair.mask, params)
        moved = estimate_global_shift(self.pair.fixed, translate(self.pair.moving, t), self.pair.mask, params)
        assertShiftRecovered(np.subtract(moved.shift_mm, base.shift_mm), t, BIN_WIDTH_MM)

    def test_empty_mask(self):
        empty = BinaryMask.fromGrid(self.pair.mask.grid)
        with self.assertRaises(EmptyMaskError):
            estimate_global_shift(self.pair.fixed, self.pair.moving, empty, workingParams())


class DefaultParametersTest(unittest.TestCase):
    def test_full_resolution_phantom(self):
        truth = (24., -16., 8.)
        pair = generate(PhantomSpec.textured(0, truth_shift_mm=truth, gain=1.5, bias=0.1))
        result = estimate_global_shift(pair.fixed, pair.moving, pair.mask, PMParams())
        assertShiftRecovered(result.shift_mm, truth, TOLERANCE_MM)


if __name__ == '__main__':
    test_classes_to_run = [
        AffineRecoveryTest, GammaRecoveryTest, InvertedRecoveryTest, PipelineTest, DefaultParametersTest
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
