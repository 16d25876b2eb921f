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
Constants shared by every topoflow module.

Coordinate conventions: the camera looks down +z, the image origin is the
top-left corner and pixel (i, j) has its center at (i + 0.5, j + 0.5).
Every flow field stores absolute continuous coordinates in its destination
space using the same half-pixel convention.
"""

from enum import IntEnum

__version__ = '0.3.0'


class Instance(IntEnum):
    BACKGROUND = 0
    HAND = 1
    OBJECT = 2


# index stored in the face map where no triangle covers the pixel center.
BACKGROUND_FACE = -1

# geometric thresholds.
MIN_DEPTH = 1e-6              # meters, camera-frame z below which a vertex is behind the camera
DEGENERATE_AREA_3D = 1e-12    # square meters
DEGENERATE_AREA_2D = 1e-12    # square pixels (|cross(b - a, c - a)|)
ORTHONORMAL_TOL = 1e-6

# unified surface space defaults.
DEFAULT_ATLAS_SIZE = 1024
DEFAULT_MARGIN = 1.0
DEFAULT_DILATION = 2
MIN_CELL_INTERIOR = 2.0       # pixels, c - 2m must reach this

# metrics defaults.
NUM_HAND_JOINTS = 21
PCK_MAX_MM = 50.0
PCK_STEPS = 100
ADD_DIAMETER_FRACTION = 0.1

# binary field formats.
TFLO_MAGIC = b'TFLO'
TMAP_MAGIC = b'TMAP'
TFLO_VERSION = 1
TFLO_HEADER_FORMAT = '<4sIIII'   # magic, version, width, height, channels
TFLO_HEADER_SIZE = 20

# cli exit codes.
EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INVALID_INPUT = 2

# environment variable controlling the log level.
LOG_ENV = 'TOPOFLOW_LOG'

# artifact kinds recorded in run manifests.
KIND_IMAGE = 'image'
KIND_MASK = 'mask'
KIND_FLOW = 'flow'
KIND_TOPOLOGY = 'topology'
KIND_DEPTH = 'depth'
KIND_FACE_MAP = 'face_map'
KIND_MANIFEST = 'manifest'
