#
# topoflow
# Copyright (C) 2026 The topoflow developers
#
# This program is free software; you can redistribute it and/or
# modify it under the terms of the GNU General Public
# License as published by the Free Software Foundation;
# either version 2 of the License, or (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.
# See the GNU General Public License for more details.
#

"""
TFLO / TMAP binary field files.

Layout, all little-endian::

    offset  size  field
    0       4     magic, b'TFLO' (flow, depth) or b'TMAP' (topology map)
    4       4     version, unsigned, always 1
    8       4     width, unsigned
    12      4     height, unsigned
    16      4     channels, unsigned (2 for flow and topology, 1 for depth)
    20      ...   width * height * channels float32, row-major, top row
                  first, channels interleaved

NaN marks an invalid entry. Depth maps store NaN for background pixels and
read back as +inf.
"""

import struct

import numpy as np

from topoflow.buffers import FlowField, TopologyMap
from topoflow.defines import (
    TFLO_MAGIC, TMAP_MAGIC, TFLO_VERSION, TFLO_HEADER_FORMAT, TFLO_HEADER_SIZE,
    KIND_FLOW, KIND_TOPOLOGY, KIND_DEPTH,
)
from topoflow.errors import BadMagic, TruncatedPayload, UnsupportedVersion, InputError, IoError, FileNotFound
from topoflow.log import get_logger

logger = get_logger(__name__)

_PAYLOAD_DTYPE = np.dtype('<f4')


class TfloHeader(object):
    """Decoded 20 byte header"""

    def __init__(self, magic: bytes, version: int, width: int, height: int, channels: int):
        self.magic = magic
        self.version = version
        self.width = width
        self.height = height
        self.channels = channels

    @property
    def kind(self):
        if self.magic == TMAP_MAGIC:
            return KIND_TOPOLOGY
        return KIND_DEPTH if self.channels == 1 else KIND_FLOW

    @property
    def payload_size(self):
        return self.width * self.height * self.channels * _PAYLOAD_DTYPE.itemsize

    def pack(self):
        return struct.pack(TFLO_HEADER_FORMAT, self.magic, self.version, self.width, self.height, self.channels)

    @classmethod
    def unpack(cls, data: bytes):
        """
        @raise TruncatedPayload:   Fewer than 20 bytes.
        @raise BadMagic:           Neither TFLO nor TMAP.
        @raise UnsupportedVersion: Version other than 1.
        """

        if len(data) < TFLO_HEADER_SIZE:
            raise TruncatedPayload('header needs {} bytes, got {}'.format(TFLO_HEADER_SIZE, len(data)))

        magic, version, width, height, channels = struct.unpack(TFLO_HEADER_FORMAT, data[:TFLO_HEADER_SIZE])

        if magic not in (TFLO_MAGIC, TMAP_MAGIC):
            raise BadMagic('unknown magic {!r}'.format(magic))

        if version != TFLO_VERSION:
            raise UnsupportedVersion('version {} (supported: {})'.format(version, TFLO_VERSION))

        if channels not in (1, 2) or (magic == TMAP_MAGIC and channels != 2):
            raise InputError('{!r} file with {} channels'.format(magic, channels))

        return cls(magic, version, width, height, channels)

    def __repr__(self):
        return 'TfloHeader(magic={!r}, version={}, width={}, height={}, channels={})'.format(
            self.magic, self.version, self.width, self.height, self.channels)


def _field_payload(field):
    # returns (magic, (H, W, C) float32 array)
    if isinstance(field, FlowField):
        return TFLO_MAGIC, field.vectors

    if isinstance(field, TopologyMap):
        return TMAP_MAGIC, field.values

    depth = np.array(field, dtype=np.float32, copy=True)
    if depth.ndim != 2:
        raise InputError('depth grid must be (H, W), got {}'.format(depth.shape))

    depth[~np.isfinite(depth)] = np.nan
    return TFLO_MAGIC, depth[:, :, None]


def encode_tflo(field) -> bytes:
    """
    @type  field: FlowField, TopologyMap or Array (H, W)
    @param field: Field to serialize; non-finite depth entries become NaN
    """

    magic, values = _field_payload(field)
    height, width, channels = values.shape

    if width < 1 or height < 1:
        raise InputError('cannot serialize an empty {}x{} field'.format(width, height))

    header = TfloHeader(magic, TFLO_VERSION, width, height, channels)
    return header.pack() + np.ascontiguousarray(values, dtype=_PAYLOAD_DTYPE).tobytes()


def write_tflo(field, path):
    """
    @raise IoError: The file cannot be written.
    """

    data = encode_tflo(field)

    try:
        with open(path, 'wb') as tflo:
            tflo.write(data)
    except OSError as err:
        raise IoError(path, err.strerror or str(err))

    logger.debug('wrote {} ({} bytes)'.format(path, len(data)))


def decode_tflo(data: bytes):
    """
    @raise TruncatedPayload: Payload shorter or longer than the header announces.

    @rtype:  FlowField, TopologyMap or Array (H, W) float32
    @return: Decoded field; the type follows the magic and channel count.
    """

    header = TfloHeader.unpack(data)
    payload = data[TFLO_HEADER_SIZE:]

    if len(payload) < header.payload_size:
        raise TruncatedPayload('payload holds {} of {} bytes'.format(len(payload), header.payload_size))

    if len(payload) > header.payload_size:
        raise TruncatedPayload('{} trailing bytes after the payload'.format(len(payload) - header.payload_size))

    values = np.frombuffer(payload, dtype=_PAYLOAD_DTYPE).astype(np.float32)
    values = values.reshape(header.height, header.width, header.channels)

    if header.magic == TMAP_MAGIC:
        return TopologyMap(values)

    if header.channels == 2:
        return FlowField(values)

    depth = values[:, :, 0].copy()
    depth[np.isnan(depth)] = np.inf
    return depth


def read_tflo(path):
    """
    @raise FileNotFound: No such file.
    """

    try:
        with open(path, 'rb') as tflo:
            data = tflo.read()
    except FileNotFoundError:
        raise FileNotFound(path)
    except OSError as err:
        raise IoError(path, err.strerror or str(err))

    return decode_tflo(data)


def read_header(path) -> TfloHeader:
    try:
        with open(path, 'rb') as tflo:
            return TfloHeader.unpack(tflo.read(TFLO_HEADER_SIZE))
    except FileNotFoundError:
        raise FileNotFound(path)


def hex_dump(data: bytes, addr: int = 0, prefix: str = ''):
    """
    Utility function that converts data into hex dump format.

    @type  data:   Raw Bytes
    @param data:   Raw bytes to view in hex dump
    @type  addr:   Integer
    @param addr:   (Optional, def=0) Offset to start hex offset display from
    @type  prefix: String
    @param prefix: (Optional, def="") String to prefix each line of hex dump with.

    @rtype:  String
    @return: Hex dump of data.
    """

    lines = []

    for start in range(0, len(data), 16):
        chunk = data[start:start + 16]
        hex_part = ' '.join('{:02x}'.format(byte) for byte in chunk)
        text = ''.join(chr(byte) if 32 <= byte <= 126 else '.' for byte in chunk)
        lines.append('{}{:04x}: {:<47}  {}'.format(prefix, addr + start, hex_part, text))

    return '\n'.join(lines)
