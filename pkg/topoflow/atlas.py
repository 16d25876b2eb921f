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
Unified surface space construction.

The unified space is one square atlas image split into two disjoint
sub-rectangles: the hand owns the left half, the object the right half.
Each texel inside a face's atlas triangle is permanently bound to that face,
whatever the pose. The hand always gets a generated grid atlas; the object
keeps its OBJ texture coordinates when it has them.
"""

import math

import numpy as np

from topoflow.defines import Instance, DEFAULT_ATLAS_SIZE, DEFAULT_MARGIN, MIN_CELL_INTERIOR
from topoflow.errors import CellTooSmall, EmptyMesh, InputError, UVOutOfRange
from topoflow.log import get_logger

logger = get_logger(__name__)


def default_rects(atlas_size: int):
    """
    @rtype:  Dict
    @return: Instance -> (x0, y0, x1, y1) pixel bounds of its half of the atlas.
    """

    half = atlas_size / 2.0
    return {
        Instance.HAND: (0.0, 0.0, half, float(atlas_size)),
        Instance.OBJECT: (half, 0.0, float(atlas_size), float(atlas_size)),
    }


# texture coordinates this far past [0, 1] still count as inside.
UV_TOL = 1e-6


def wrap_face_uvs(face_uvs):
    """
    Shift each face's texture coordinates by whole texture repeats so the
    face lies in [0, 1]^2. Faces already inside are left untouched.

    @type  face_uvs: Array (N_f, 3, 2)
    @param face_uvs: Per-face texture coordinates, origin bottom-left

    @raise UVOutOfRange: A face spans more than one repeat of the texture.
    @rtype:  Array (N_f, 3, 2)
    @return: Wrapped copy, clipped to [0, 1].
    """

    face_uvs = np.array(face_uvs, dtype=np.float64)
    low = face_uvs.min(axis=1)
    outside = (low < -UV_TOL) | (face_uvs.max(axis=1) > 1.0 + UV_TOL)

    shift = np.where(outside, np.floor(low + UV_TOL), 0.0)
    face_uvs -= shift[:, None, :]

    straddling = (face_uvs.max(axis=1) > 1.0 + UV_TOL).any(axis=1)
    if straddling.any():
        face = int(np.flatnonzero(straddling)[0])
        raise UVOutOfRange('{} faces cross a texture repeat seam, first is face {} with uvs {}'.format(
            int(straddling.sum()), face, face_uvs[face].tolist()))

    if outside.any():
        logger.debug('wrapped the texture coordinates of {} faces into [0, 1]'.format(int(outside.any(axis=1).sum())))

    return np.clip(face_uvs, 0.0, 1.0)


class AtlasLayout(object):
    """Placement of every instance inside the unified atlas"""

    def __init__(self, atlas_size: int = DEFAULT_ATLAS_SIZE, margin: float = DEFAULT_MARGIN,
                 hand_rect=None, object_rect=None):
        """
        @type  atlas_size:  Integer
        @param atlas_size:  (Optional, def=1024) Side of the square atlas in pixels
        @type  margin:      Float
        @param margin:      (Optional, def=1) Cell margin in pixels
        @type  hand_rect:   Tuple (x0, y0, x1, y1)
        @param hand_rect:   (Optional, def=left half) Hand sub-rectangle
        @type  object_rect: Tuple (x0, y0, x1, y1)
        @param object_rect: (Optional, def=right half) Object sub-rectangle
        """

        if int(atlas_size) < 2:
            raise InputError('atlas size must be at least 2, got {}'.format(atlas_size))

        rects = default_rects(int(atlas_size))

        self.atlas_size = int(atlas_size)
        self.margin = float(margin)
        self.hand_rect = tuple(float(v) for v in (hand_rect or rects[Instance.HAND]))
        self.object_rect = tuple(float(v) for v in (object_rect or rects[Instance.OBJECT]))
        self.cells_per_row = {}     # instance -> grid cells per row, grid atlases only
        self.cell_side = {}         # instance -> cell side in pixels, grid atlases only
        self.object_uv_source = None  # 'obj' or 'grid' once the object is placed

        for rect in (self.hand_rect, self.object_rect):
            x0, y0, x1, y1 = rect
            if not (0 <= x0 < x1 <= self.atlas_size and 0 <= y0 < y1 <= self.atlas_size):
                raise InputError('sub-rectangle {} outside a {} px atlas'.format(rect, self.atlas_size))

        if _overlap(self.hand_rect, self.object_rect):
            raise InputError('hand and object sub-rectangles overlap')

    def rect_of(self, instance: Instance):
        return self.hand_rect if Instance(instance) == Instance.HAND else self.object_rect

    def key(self):
        return (self.atlas_size, self.margin, self.hand_rect, self.object_rect,
                tuple(sorted((int(k), v) for k, v in self.cells_per_row.items())),
                tuple(sorted((int(k), v) for k, v in self.cell_side.items())),
                self.object_uv_source)

    def __eq__(self, other):
        return isinstance(other, AtlasLayout) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def object_uvs_to_atlas(self, face_uvs):
        """
        Map OBJ texture coordinates (origin bottom-left) into the object
        sub-rectangle, in atlas pixels (origin top-left). Coordinates outside
        [0, 1] are wrapped first, see wrap_face_uvs().

        @raise UVOutOfRange: A face crosses a texture repeat seam.
        """

        x0, y0, x1, y1 = self.object_rect
        face_uvs = wrap_face_uvs(face_uvs)

        atlas = np.empty_like(face_uvs)
        atlas[..., 0] = x0 + face_uvs[..., 0] * (x1 - x0)
        atlas[..., 1] = y0 + (1.0 - face_uvs[..., 1]) * (y1 - y0)

        return atlas

    def to_dict(self):
        return {
            'atlas_size': self.atlas_size,
            'margin': self.margin,
            'hand_rect': list(self.hand_rect),
            'object_rect': list(self.object_rect),
            'cells_per_row': {Instance(k).name.lower(): v for k, v in self.cells_per_row.items()},
            'cell_side': {Instance(k).name.lower(): v for k, v in self.cell_side.items()},
            'object_uv_source': self.object_uv_source,
        }

    def __repr__(self):
        return 'AtlasLayout({})'.format(self.to_dict())


def _overlap(a, b):
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def grid_cells(num_faces: int, rect, margin: float):
    """
    @rtype:  Tuple
    @return: (cells per row, cell side in pixels).

    @raise CellTooSmall: c - 2m falls below 2 px.
    """

    per_row = int(math.ceil(math.sqrt(num_faces)))
    rows = int(math.ceil(num_faces / per_row))
    width = rect[2] - rect[0]
    height = rect[3] - rect[1]
    side = min(width / per_row, height / rows)

    if side - 2.0 * margin < MIN_CELL_INTERIOR:
        raise CellTooSmall('{} faces need {}x{} cells of {:.3f} px with margin {}'.format(
            num_faces, per_row, rows, side, margin))

    return per_row, side


def grid_face_uvs_px(num_faces: int, rect, margin: float):
    """
    Face f sits in cell (f mod A, f div A); inside a cell of side c the
    triangle is ((m, m), (c - m, m), (m, c - m)) offset by the cell origin.

    @rtype:  Tuple
    @return: (Array (N_f, 3, 2) atlas pixel coordinates, cells per row, cell side)
    """

    per_row, side = grid_cells(num_faces, rect, margin)
    index = np.arange(num_faces)
    origin_x = rect[0] + (index % per_row) * side
    origin_y = rect[1] + (index // per_row) * side

    corners = np.array([[margin, margin], [side - margin, margin], [margin, side - margin]])
    uvs = np.empty((num_faces, 3, 2), dtype=np.float64)
    uvs[:, :, 0] = origin_x[:, None] + corners[None, :, 0]
    uvs[:, :, 1] = origin_y[:, None] + corners[None, :, 1]

    return uvs, per_row, side


def build_grid_atlas(mesh, atlas_size: int = DEFAULT_ATLAS_SIZE, margin: float = DEFAULT_MARGIN,
                     layout: AtlasLayout = None):
    """
    Unravel a mesh into a regular grid of per-face cells inside its
    instance's sub-rectangle.

    @type  mesh:       Mesh
    @param mesh:       Mesh with at least one face
    @type  atlas_size: Integer
    @param atlas_size: (Optional, def=1024) Atlas side in pixels, ignored when layout is given
    @type  margin:     Float
    @param margin:     (Optional, def=1) Margin inside each cell in pixels
    @type  layout:     AtlasLayout
    @param layout:     (Optional) Layout to record the grid in

    @raise EmptyMesh:    The mesh has no faces.
    @raise CellTooSmall: Cells too small for the margin.
    @rtype:  Tuple
    @return: (face uvs normalized to atlas coordinates, AtlasLayout)
    """

    if layout is None:
        layout = AtlasLayout(atlas_size, margin)

    return _place_grid(mesh, layout) / layout.atlas_size, layout


def _place_grid(mesh, layout, instance=None):
    # records the grid in the layout and returns atlas pixel coordinates.
    instance = Instance(mesh.instance if instance is None else instance)

    if mesh.num_faces < 1:
        raise EmptyMesh('cannot build an atlas for a mesh without faces')

    rect = layout.rect_of(instance)
    uvs_px, per_row, side = grid_face_uvs_px(mesh.num_faces, rect, layout.margin)

    layout.cells_per_row[instance] = per_row
    layout.cell_side[instance] = side
    if instance == Instance.OBJECT:
        layout.object_uv_source = 'grid'

    logger.debug('{} grid atlas: {} cells per row, cell side {:.3f} px'.format(
        instance.name.lower(), per_row, side))

    return uvs_px


def build_unified_atlas(hand=None, obj=None, atlas_size: int = DEFAULT_ATLAS_SIZE,
                        margin: float = DEFAULT_MARGIN):
    """
    Build P^u for the combined face index space (hand faces first, then
    object faces).

    @rtype:  Tuple
    @return: (Array (N_f, 3, 2) atlas pixel coordinates, AtlasLayout)
    """

    layout = AtlasLayout(atlas_size, margin)
    parts = []

    if hand is not None:
        parts.append(_place_grid(hand, layout, Instance.HAND))

    if obj is not None:
        if obj.face_uvs is not None:
            layout.object_uv_source = 'obj'
            parts.append(layout.object_uvs_to_atlas(obj.face_uvs))
        else:
            parts.append(_place_grid(obj, layout, Instance.OBJECT))

    if not parts:
        raise EmptyMesh('scene has neither hand nor object')

    return np.concatenate(parts, axis=0), layout
