import os
import sys
import tempfile
import unittest

import numpy as np
import pandas as pd

from fovmatch import (BinaryMask, EmptyMaskError, EvalReport, GridMismatchError, align_moving, dice,
                      evaluate_alignment, shift_error, translate, write_results_csv)
from fovmatch.aggregate import mode_shift, shift_histogram
from fovmatch.patchmatch import ShiftField
from testutils import texturedVolume


def boxMask(dims, lo, hi, spacing=(1., 1., 1.), origin=(0., 0., 0.)):
    data = np.zeros(dims[::-1], dtype=bool)
    data[lo[2]:hi[2], lo[1]:hi[1], lo[0]:hi[0]] = True
    return BinaryMask(data, spacing, origin)


class DiceTest(unittest.TestCase):
    DIMS = (10, 10, 10)

    def test_identity(self):
        m = boxMask(self.DIMS, (2, 2, 2), (6, 7, 8))
        self.assertEqual(dice(m, m), 1.)

    def test_disjoint(self):
        a = boxMask(self.DIMS, (0, 0, 0), (3, 3, 3))
        b = boxMask(self.DIMS, (5, 5, 5), (8, 8, 8))
        self.assertEqual(dice(a, b), 0.)

    def test_half_overlap(self):
        a = boxMask(self.DIMS, (0, 0, 0), (4, 4, 4))
        b = boxMask(self.DIMS, (2, 0, 0), (6, 4, 4))
        self.assertEqual(dice(a, b), 0.5)

    def test_symmetry_and_range(self):
        rng = np.random.default_rng(8)
        for _ in range(5):
            a = BinaryMask(rng.random(self.DIMS) > 0.6)
            b = BinaryMask(rng.random(self.DIMS) > 0.3)
            value = dice(a, b)
            self.assertEqual(value, dice(b, a))
            self.assertTrue(0. <= value <= 1.)

    def test_errors(self):
        empty = BinaryMask(np.zeros(self.DIMS, dtype=bool))
        with self.assertRaises(EmptyMaskError):
            dice(empty, empty)
        self.assertEqual(dice(empty, boxMask(self.DIMS, (0, 0, 0), (2, 2, 2))), 0.)
        with self.assertRaises(GridMismatchError):
            dice(empty, BinaryMask(np.ones((3, 3, 3), dtype=bool)))


class ShiftErrorTest(unittest.TestCase):
    def test_examples(self):
        self.assertEqual(shift_error((24., -16., 8.), (24., -16., 8.)), (0., 0., 0.))
        self.assertEqual(shift_error((26., -14., 10.), (24., -16., 8.)), (2., 2., 2.))
        self.assertEqual(shift_error((-3., 0., 5.), (1., 0., -5.)), (4., 0., 10.))

    def test_global_shift(self):
        field = ShiftField(np.broadcast_to(np.array([6, -4, 2]), (2, 2, 2, 3)))
        gs = mode_shift(shift_histogram(field, BinaryMask(np.ones((2, 2, 2), dtype=bool)), 4., -100., 100., 50))
        self.assertEqual(shift_error(gs, (24., -16., 8.)), (2., 2., 2.))


class AlignmentTest(unittest.TestCase):
    def setUp(self):
        self.fixed = boxMask((30, 30, 30), (8, 8, 8), (20, 18, 16), spacing=(2., 2., 2.))
        self.truth = (6., -4., 8.)
        # moving(p + truth) = fixed(p)
        shifted = np.roll(self.fixed.data, (4, -2, 3), axis=(0, 1, 2))
        self.moving = BinaryMask(shifted, (2., 2., 2.))

    def test_recovered_shift(self):
        report = evaluate_alignment(self.fixed, self.moving, self.truth, truth=self.truth, runtime=2.5)
        self.assertLess(report.dsc_before, 1.)
        self.assertEqual(report.dsc_after, 1.)
        self.assertEqual(report.shift_error_mm, (0., 0., 0.))
        self.assertEqual(report.runtime_seconds, 2.5)

    def test_zero_shift(self):
        report = evaluate_alignment(self.fixed, self.moving, (0., 0., 0.))
        self.assertEqual(report.dsc_before, report.dsc_after)
        self.assertIsNone(report.shift_error_mm)
        self.assertNotIn("shift_error_x_mm", report.asDict())

    def test_moving_on_another_grid(self):
        # same world content sampled at 1 mm
        data = np.repeat(np.repeat(np.repeat(self.moving.data, 2, 0), 2, 1), 2, 2)
        fine = BinaryMask(data, (1., 1., 1.), (-0.5, ) * 3)
        report = evaluate_alignment(self.fixed, fine, self.truth)
        self.assertGreater(report.dsc_after, 0.95)

    def test_align_moving(self):
        I = texturedVolume((20, 20, 20), seed=9)
        J = translate(I, (3., 0., -2.))
        aligned = align_moving(J, (3., 0., -2.))
        inside = (slice(3, -3), ) * 3
        self.assertTrue(np.allclose(aligned.data[inside], I.data[inside], atol=1e-6))


class ResultsTest(unittest.TestCase):
    def test_results_csv(self):
        rows = [dict(case=i, **EvalReport(0.5, 0.9 + 0.01 * i, (1., 2., 3.), 4.).asDict()) for i in range(3)]
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "results.csv")
            write_results_csv(rows, path)
            table = pd.read_csv(path)
        self.assertEqual(list(table.columns), [
            "case", "dsc_before", "dsc_after", "shift_error_x_mm", "shift_error_y_mm", "shift_error_z_mm",
            "runtime_seconds"
        ])
        self.assertEqual(table["case"].tolist(), [0, 1, 2])
        self.assertAlmostEqual(table["dsc_after"].iloc[2], 0.92)


if __name__ == '__main__':
    test_classes_to_run = [DiceTest, ShiftErrorTest, AlignmentTest, ResultsTest]
    loader = unittest.TestLoader()
    suites_list = []
    for test_class in test_classes_to_run:
        suite = loader.loadTestsFromTestCase(test_class)
        suites_list.append(suite)
    big_suite = unittest.TestSuite(suites_list)
    runner = unittest.TextTestRunner()
    results = runner.run(big_suite)
    sys.exit(not results.wasSuccessful())
