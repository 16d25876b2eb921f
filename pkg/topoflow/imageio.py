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
PNG reading and writing. Images are 8-bit RGBA, masks 8-bit grayscale with
values {0, 255}, face-index dumps 16-bit grayscale holding face + 1.
"""

import numpy as np
from PIL import Image

from topoflow.errors import FileNotFound, IoError, InputError
from topoflow.log import get_logger

logger = get_logger(__name__)

# fixed encoder settings keep repeated runs byte-identical.
PNG_OPTIONS = {'format': 'PNG', 'compress_level': 6, 'optimize': False}

FACE_MAP_MAX = 0xffff


def open_image(path):
    try:
        image = Image.open(path)
        image.load()
    except FileNotFoundError:
        raise FileNotFound(path)
    except OSError as err:
        raise InputError('{}: cannot decode image ({})'.format(path, err))
    return image


def _save(image, path):
    try:
        image.save(path, **PNG_OPTIONS)
    except OSError as err:
        raise IoError(path, str(err))
    logger.debug('wrote {} ({}x{} {})'.format(path, image.width, image.height, image.mode))


def read_image(path):
    """
    @rtype:  Array (H, W, 4) uint8
    @return: RGBA pixels; images without alpha come back fully opaque.
    """

    return np.array(open_image(path).convert('RGBA'), dtype=np.uint8)


def write_image(path, image):
    """
    @type  image: Array (H, W, 3|4) uint8
    @param image: Pixels to encode; RGB input gets an opaque alpha channel
    """

    image = np.asarray(image)

    if image.dtype != np.uint8 or image.ndim != 3 or image.shape[2] not in (3, 4):
        raise InputError('expected an (H, W, 3|4) uint8 image, got {} {}'.format(image.shape, image.dtype))

    if image.shape[2] == 3:
        image = np.concatenate([image, np.full(image.shape[:2] + (1,), 255, dtype=np.uint8)], axis=2)

    _save(Image.fromarray(np.ascontiguousarray(image)), path)


def read_mask(path):
    """Non-zero pixels of the first channel are set."""

    image = open_image(path)
    if image.mode not in ('L', '1', 'I;16', 'I'):
        image = image.convert('L')
    return np.array(image) > 0


def write_mask(path, mask):
    mask = np.asarray(mask, dtype=bool)
    _save(Image.fromarray(np.where(mask, 255, 0).astype(np.uint8)), path)


def write_face_map(path, face):
    """
    @type  face: Array (H, W) int
    @param face: Face index map, -1 for background; stored as face + 1, clamped to 65535
    """

    shifted = np.clip(np.asarray(face, dtype=np.int64) + 1, 0, FACE_MAP_MAX).astype(np.uint16)
    _save(Image.fromarray(shifted), path)


def read_face_map(path):
    return np.array(open_image(path), dtype=np.int32) - 1
