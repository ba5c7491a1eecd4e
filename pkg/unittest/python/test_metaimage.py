import os
import sys
import tempfile
import unittest

import numpy as np

from fovmatch import BinaryMask, Volume, VolumeFormatError, load_mask, load_volume, save_mask, save_volume
from testutils import texturedVolume


def writeHeader(path, lines):
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


class VolumeIOAbstractTestCase(unittest.TestCase):
    EXTENSION = None

    def setUp(self):
        if self.EXTENSION is None:
            self.skipTest("abstract test case")
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, "volume" + self.EXTENSION)

    def tearDown(self):
        if hasattr(self, "tmp"):
            self.tmp.cleanup()

    def test_round_trip(self):
        v = texturedVolume((7, 5, 3), seed=2, spacing=(0.7, 1.25, 3.), origin=(-12.5, 3.1, 100.))
        v = v.like(v.data.astype(np.float32))
        save_volume(v, self.path)
        w = load_volume(self.path)
        self.assertEqual(w.dims, v.dims, "Wrong dims after reload.")
        self.assertEqual(w.spacing, v.spacing, "Wrong spacing after reload.")
        self.assertEqual(w.origin, v.origin, "Wrong origin after reload.")
        self.assertTrue(np.array_equal(w.data, v.data), "Samples changed after reload.")

    def test_double_samples_narrowed(self):
        v = texturedVolume((5, 4, 3), seed=3)
        save_volume(v, self.path)
        w = load_volume(self.path)
        self.assertTrue(np.array_equal(w.data, v.data.astype(np.float32)), "Samples must be stored as MET_FLOAT.")
        self.assertTrue(np.allclose(w.data, v.data, rtol=1e-6, atol=1e-6))

    def test_single_voxel(self):
        save_volume(Volume(np.full((1, 1, 1), 7.)), self.path)
        w = load_volume(self.path)
        self.assertEqual(w.data.size, 1)
        self.assertEqual(float(w.data[0, 0, 0]), 7.)

    def test_mask_round_trip(self):
        data = np.zeros((4, 5, 6), dtype=bool)
        data[1:3, 2:4, 1:5] = True
        save_mask(BinaryMask(data, (2., 2., 2.)), self.path)
        m = load_mask(self.path)
        self.assertTrue(np.array_equal(m.data, data))
        self.assertEqual(m.spacing, (2., 2., 2.))


class MhaVolumeIOTest(VolumeIOAbstractTestCase):
    EXTENSION = ".mha"


class MhdVolumeIOTest(VolumeIOAbstractTestCase):
    EXTENSION = ".mhd"


class MetaImageHeaderTest(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.header = os.path.join(self.tmp.name, "image.mhd")
        self.raw = os.path.join(self.tmp.name, "image.raw")

    def tearDown(self):
        self.tmp.cleanup()

    def writeImage(self, elementType="MET_FLOAT", dims="4 4 4", extra=(), data=None):
        lines = [
            "ObjectType = Image", "NDims = 3",
            "DimSize = %s" % dims, "ElementSpacing = 1 1 1", "Offset = 0 0 0",
            "ElementType = %s" % elementType
        ] + list(extra) + ["ElementDataFile = image.raw"]
        writeHeader(self.header, lines)
        if data is not None:
            data.tofile(self.raw)

    def test_valid_header(self):
        self.writeImage(data=np.arange(64, dtype="<f4"))
        v = load_volume(self.header)
        self.assertEqual(v.dims, (4, 4, 4))
        self.assertEqual(v.data.size, 64)
        self.assertTrue(np.all(np.isfinite(v.data)))
        # X is the fastest axis
        self.assertEqual(float(v.data[0, 0, 1]), 1.)
        self.assertEqual(float(v.data[0, 1, 0]), 4.)
        self.assertEqual(float(v.data[1, 0, 0]), 16.)

    def test_element_count_mismatch(self):
        self.writeImage(data=np.zeros(60, dtype="<f4"))
        with self.assertRaisesRegex(VolumeFormatError, "element count mismatch"):
            load_volume(self.header)

    def test_missing_file(self):
        with self.assertRaises(FileNotFoundError):
            load_volume(os.path.join(self.tmp.name, "nothing.mhd"))
        self.writeImage()
        with self.assertRaises(FileNotFoundError):
            load_volume(self.header)

    def test_unsupported_element_type(self):
        self.writeImage(elementType="MET_LONG_LONG", data=np.zeros(64, dtype="<i8"))
        with self.assertRaises(VolumeFormatError):
            load_volume(self.header)

    def test_malformed_header(self):
        writeHeader(self.header, ["ObjectType = Image", "DimSize = 4 4", "ElementType = MET_FLOAT",
                                  "ElementDataFile = image.raw"])
        with self.assertRaises(VolumeFormatError):
            load_volume(self.header)

    def test_integer_widening(self):
        self.writeImage(elementType="MET_SHORT", dims="2 2 1", data=np.array([-3, 0, 5, 32767], dtype="<i2"))
        v = load_volume(self.header)
        self.assertEqual(v.data.dtype, np.float64)
        self.assertEqual(v.data.ravel().tolist(), [-3., 0., 5., 32767.])

    def test_big_endian(self):
        self.writeImage(elementType="MET_USHORT", dims="3 1 1", extra=["BinaryDataByteOrderMSB = True"],
                        data=np.array([1, 256, 1000], dtype=">u2"))
        v = load_volume(self.header)
        self.assertEqual(v.data.ravel().tolist(), [1., 256., 1000.])

    def test_write_failure(self):
        with self.assertRaises(OSError):
            save_volume(Volume(np.zeros((2, 2, 2))), os.path.join(self.tmp.name, "missing", "v.mha"))


if __name__ == '__main__':
    test_classes_to_run = [MhaVolumeIOTest, MhdVolumeIOTest, MetaImageHeaderTest]
    loader = unittest.TestLoader()
    suites_list = []
    for test_class in test_classes_to_run:
        suite = loader.loadTestsFromTestCase(test_class)
        suites_list.append(suite)
    big_suite = unittest.TestSuite(suites_list)
    runner = unittest.TextTestRunner()
    results = runner.run(big_suite)
    sys.exit(not results.wasSuccessful())
