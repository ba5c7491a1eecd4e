"""
Reader and writer for the subset of the MetaImage format used by fovmatch.

A MetaImage is a text header of `Key = Value` lines followed either by the raw
samples (`ElementDataFile = LOCAL`, usually a .mha file) or by the name of a
separate raw file (a .mhd/.raw pair). Samples are stored X-fastest, which maps
onto a C-ordered numpy array indexed [z, y, x].
"""

import logging
import os
from collections import namedtuple

import numpy as np

from .exceptions import VolumeFormatError

logger = logging.getLogger(__name__)

ELEMENT_TYPES = {
    "MET_CHAR": np.int8,
    "MET_UCHAR": np.uint8,
    "MET_SHORT": np.int16,
    "MET_USHORT": np.uint16,
    "MET_INT": np.int32,
    "MET_UINT": np.uint32,
    "MET_FLOAT": np.float32,
    "MET_DOUBLE": np.float64,
}

MetaImage = namedtuple("MetaImage", ["data", "spacing", "origin", "element_type"])


def _parseVector(header, key, cast, default=None):
    if key not in header:
        if default is None:
            raise VolumeFormatError("missing header key '%s'" % key)
        return default
    try:
        values = tuple(cast(v) for v in header[key].split())
    except ValueError:
        raise VolumeFormatError("malformed header value for '%s': %r" % (key, header[key]))
    if len(values) != 3:
        raise VolumeFormatError("header key '%s' must hold 3 values, got %d" % (key, len(values)))
    return values


def _readHeader(path):
    header = {}
    offset = 0
    with open(path, "rb") as f:
        for raw in f:
            offset += len(raw)
            line = raw.decode("latin-1").strip()
            if not line:
                continue
            if "=" not in line:
                raise VolumeFormatError("malformed header line in %s: %r" % (path, line))
            key, value = (s.strip() for s in line.split("=", 1))
            header[key] = value
            # Nothing after ElementDataFile belongs to the header
            if key == "ElementDataFile":
                break
    return header, offset


def read_metaimage(path):
    """ Read a 3D MetaImage file.

    :param path: header file (.mhd or .mha)
    :return MetaImage tuple whose data is indexed [z, y, x]
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise FileNotFoundError("no such MetaImage file: %s" % path)
    header, offset = _readHeader(path)

    if header.get("ObjectType", "Image") != "Image":
        raise VolumeFormatError("unsupported ObjectType %r in %s" % (header["ObjectType"], path))
    if header.get("NDims", "3") != "3":
        raise VolumeFormatError("only 3D images are supported, NDims=%s in %s" % (header["NDims"], path))
    if int(header.get("ElementNumberOfChannels", "1")) != 1:
        raise VolumeFormatError("only scalar images are supported in %s" % path)
    if header.get("CompressedData", "False").lower() == "true":
        raise VolumeFormatError("compressed MetaImage data is not supported in %s" % path)

    dims = _parseVector(header, "DimSize", int)
    spacing = _parseVector(header, "ElementSpacing", float, default=(1., 1., 1.))
    origin = _parseVector(header, "Offset", float, default=_parseVector(header, "Origin", float, (0., 0., 0.)))
    if any(d <= 0 for d in dims):
        raise VolumeFormatError("non-positive DimSize %s in %s" % (dims, path))

    elementType = header.get("ElementType")
    if elementType not in ELEMENT_TYPES:
        raise VolumeFormatError("unsupported element type %r in %s" % (elementType, path))
    dtype = np.dtype(ELEMENT_TYPES[elementType])
    msb = header.get("BinaryDataByteOrderMSB", header.get("ElementByteOrderMSB", "False")).lower() == "true"
    dtype = dtype.newbyteorder(">" if msb else "<")

    dataFile = header.get("ElementDataFile")
    if dataFile is None:
        raise VolumeFormatError("missing header key 'ElementDataFile' in %s" % path)
    if dataFile == "LOCAL":
        with open(path, "rb") as f:
            f.seek(offset)
            data = np.frombuffer(f.read(), dtype=dtype)
    else:
        rawPath = os.path.join(os.path.dirname(path), dataFile)
        if not os.path.isfile(rawPath):
            raise FileNotFoundError("no such MetaImage data file: %s" % rawPath)
        data = np.fromfile(rawPath, dtype=dtype)

    count = dims[0] * dims[1] * dims[2]
    if data.size != count:
        raise VolumeFormatError("element count mismatch in %s: header declares %d samples, found %d" %
                                (path, count, data.size))
    data = data.reshape(dims[2], dims[1], dims[0])
    logger.debug("read %s: dims=%s spacing=%s origin=%s type=%s", path, dims, spacing, origin, elementType)
    return MetaImage(data, spacing, origin, elementType)


def write_metaimage(path, data, spacing, origin):
    """ Write a 3D array as MET_FLOAT MetaImage.

    A .mha path embeds the samples after the header; any other extension
    writes the header and a sibling .raw file.
    :param path: header file
    :param data: array indexed [z, y, x]
    :param spacing: voxel size (x, y, z) in mm
    :param origin: world position (x, y, z) of voxel (0, 0, 0) in mm
    """
    path = os.fspath(path)
    data = np.ascontiguousarray(data, dtype="<f4")
    nz, ny, nx = data.shape
    local = path.lower().endswith(".mha")
    rawName = "LOCAL" if local else os.path.splitext(os.path.basename(path))[0] + ".raw"
    lines = [
        "ObjectType = Image",
        "NDims = 3",
        "BinaryData = True",
        "BinaryDataByteOrderMSB = False",
        "CompressedData = False",
        "TransformMatrix = 1 0 0 0 1 0 0 0 1",
        "Offset = %s" % " ".join(repr(float(o)) for o in origin),
        "ElementSpacing = %s" % " ".join(repr(float(s)) for s in spacing),
        "DimSize = %d %d %d" % (nx, ny, nz),
        "ElementType = MET_FLOAT",
        "ElementDataFile = %s" % rawName,
    ]
    header = ("\n".join(lines) + "\n").encode("latin-1")
    with open(path, "wb") as f:
        f.write(header)
        if local:
            f.write(data.tobytes())
    if not local:
        data.tofile(os.path.join(os.path.dirname(path), rawName))
    logger.debug("wrote %s: dims=%s", path, (nx, ny, nz))
