# (c) 2024, iterative-binarization contributors
#
# This file is part of iterative-binarization.
#
# iterative-binarization is free software: you can redistribute it and/or modify
# it under the terms of the Apache License as published by
# the Apache Software Foundation, either version 2 of the License, or
# (at your option) any later version.
#
# iterative-binarization is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# Apache License for more details.

"""IDX container codec.

Layout (all integers big-endian):

    offset  size  description
    0       2     zero
    2       1     type code (0x08 = unsigned byte)
    3       1     number of dimensions d
    4       4*d   dimension sizes, uint32
    4+4d    ...   payload, product(dims) items of the type code's size
"""

import gzip
import logging
import math
import struct

import attr
import numpy as np

from iterative_binarization import constants
from iterative_binarization import exceptions as exc

default_logger = logging.getLogger(__name__)

HEADER_SIZE = 4


@attr.s(frozen=True, eq=False)
class IdxFile:
    type_code = attr.ib()
    dims = attr.ib(converter=tuple)
    payload = attr.ib()

    def __eq__(self, other):
        if not isinstance(other, IdxFile):
            return NotImplemented
        return (
            self.type_code == other.type_code
            and self.dims == other.dims
            and np.array_equal(self.payload, other.payload)
        )


def parse_idx(data):
    """Parse IDX bytes into an IdxFile; the payload is an array of shape dims.

    Parsing is bit-exact: short input and trailing bytes are both rejected.
    """
    data = bytes(data)
    if len(data) < HEADER_SIZE:
        raise exc.IdxParseError(
            f"IDX header needs {HEADER_SIZE} bytes, got {len(data)}", offset=len(data)
        )
    if data[0] != 0 or data[1] != 0:
        raise exc.IdxParseError("Bad IDX magic, first two bytes must be zero", offset=0)

    type_code = data[2]
    if type_code not in constants.IDX_TYPE_CODES:
        raise exc.IdxParseError(f"Unsupported IDX type code 0x{type_code:02x}", offset=2)
    dtype = np.dtype(constants.IDX_TYPE_CODES[type_code])

    ndim = data[3]
    dims_end = HEADER_SIZE + 4 * ndim
    if len(data) < dims_end:
        raise exc.IdxParseError(
            f"IDX dimension sizes truncated, expected {ndim} sizes ending at byte {dims_end}",
            offset=len(data),
        )
    dims = struct.unpack(f">{ndim}I", data[HEADER_SIZE:dims_end])

    payload_end = dims_end + math.prod(dims) * dtype.itemsize
    if len(data) < payload_end:
        raise exc.IdxParseError(
            f"IDX payload truncated, expected {payload_end - dims_end} bytes "
            f"but got {len(data) - dims_end}",
            offset=len(data),
        )
    if len(data) > payload_end:
        raise exc.IdxParseError(
            f"IDX has {len(data) - payload_end} trailing bytes after the payload",
            offset=payload_end,
        )

    payload = np.frombuffer(data, dtype=dtype, count=math.prod(dims), offset=dims_end)
    return IdxFile(type_code=type_code, dims=dims, payload=payload.reshape(dims))


def serialize_idx(idx_file):
    """Inverse of parse_idx."""
    dtype = np.dtype(constants.IDX_TYPE_CODES[idx_file.type_code])
    header = struct.pack(
        f">BBBB{len(idx_file.dims)}I", 0, 0, idx_file.type_code, len(idx_file.dims), *idx_file.dims
    )
    payload = np.ascontiguousarray(idx_file.payload, dtype=dtype)
    if payload.shape != idx_file.dims:
        raise exc.ConfigurationError(
            f"IDX payload shape {payload.shape} does not match dims {idx_file.dims}"
        )
    return header + payload.tobytes()


def read_idx_file(path, logger=None):
    """Read and parse an IDX file, gunzipping it when it starts with the gzip magic."""
    logger = logger or default_logger
    with open(path, "rb") as fh:
        data = fh.read()
    if data[: len(constants.GZIP_MAGIC)] == constants.GZIP_MAGIC:
        logger.debug(f"Decompressing gzip IDX file {path}")
        try:
            data = gzip.decompress(data)
        except (OSError, EOFError) as e:
            raise exc.IdxParseError(f"Corrupt gzip IDX file {path}: {e}")
    try:
        return parse_idx(data)
    except exc.IdxParseError:
        logger.error(f"Failed to parse IDX file {path}")
        raise
