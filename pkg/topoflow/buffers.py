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
Per-pixel buffers exchanged between the pipeline stages. All grids are
numpy arrays indexed [row, column] (that is [y, x]).
"""

import numpy as np

from topoflow.defines import BACKGROUND_FACE, Instance
from topoflow.errors import SizeMismatch, InputError


class RasterBuffers(object):
    """Face index, barycentric, depth and instance maps of one rendered space"""

    def __init__(self, width: int, height: int, face=None, bary=None, depth=None, instance=None):
        """
        @type  width:    Integer
        @param width:    Buffer width in pixels
        @type  height:   Integer
        @param height:   Buffer height in pixels
        @type  face:     Array (H, W) int32
        @param face:     (Optional, def=all -1) Visible face per pixel, -1 for background
        @type  bary:     Array (H, W, 3) float64
        @param bary:     (Optional, def=zeros) Barycentric weights of the pixel center
        @type  depth:    Array (H, W) float32
        @param depth:    (Optional, def=+inf) Interpolated depth in meters
        @type  instance: Array (H, W) uint8
        @param instance: (Optional, def=0) Instance label per pixel
        """

        self.width = int(width)
        self.height = int(height)
        shape = (self.height, self.width)

        self.face = np.full(shape, BACKGROUND_FACE, dtype=np.int32) if face is None else np.asarray(face, dtype=np.int32)
        self.bary = np.zeros(shape + (3,), dtype=np.float64) if bary is None else np.asarray(bary, dtype=np.float64)
        self.depth = np.full(shape, np.inf, dtype=np.float32) if depth is None else np.asarray(depth, dtype=np.float32)
        self.instance = np.zeros(shape, dtype=np.uint8) if instance is None else np.asarray(instance, dtype=np.uint8)

        for name in ('face', 'depth', 'instance'):
            if getattr(self, name).shape != shape:
                raise SizeMismatch('{} map is {}, expected {}'.format(name, getattr(self, name).shape, shape))

        if self.bary.shape != shape + (3,):
            raise SizeMismatch('bary map is {}, expected {}'.format(self.bary.shape, shape + (3,)))

    @property
    def shape(self):
        return self.height, self.width

    @property
    def covered(self):
        return self.face >= 0

    def coverage(self):
        return float(self.covered.mean())


class FlowField(object):
    """
    Per-pixel absolute coordinates into another space. Invalid entries hold
    NaN in both channels.
    """

    def __init__(self, vectors, valid=None, layout=None, kind: str = ''):
        """
        @type  vectors: Array (H, W, 2)
        @param vectors: Destination coordinates (x, y) in pixels
        @type  valid:   Array (H, W) of bool
        @param valid:   (Optional, def=finite entries) Validity mask
        @type  layout:  AtlasLayout
        @param layout:  (Optional) Atlas layout of the unified space the flow touches
        @type  kind:    String
        @param kind:    (Optional) Label such as 'u<-s'
        """

        vectors = np.array(vectors, dtype=np.float32, copy=True)

        if vectors.ndim != 3 or vectors.shape[2] != 2:
            raise InputError('flow vectors must be (H, W, 2), got {}'.format(vectors.shape))

        if valid is None:
            valid = np.isfinite(vectors).all(axis=2)
        else:
            valid = np.array(valid, dtype=bool, copy=True)
            if valid.shape != vectors.shape[:2]:
                raise SizeMismatch('validity mask {} for flow {}'.format(valid.shape, vectors.shape[:2]))
            valid &= np.isfinite(vectors).all(axis=2)

        vectors[~valid] = np.nan

        self.vectors = vectors
        self.valid = valid
        self.layout = layout
        self.kind = kind

    @property
    def height(self):
        return self.vectors.shape[0]

    @property
    def width(self):
        return self.vectors.shape[1]

    @property
    def shape(self):
        return self.vectors.shape[:2]

    @classmethod
    def identity(cls, width: int, height: int):
        """Flow mapping every pixel onto its own center."""
        xs, ys = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
        return cls(np.stack([xs, ys], axis=2), np.ones((height, width), dtype=bool), kind='identity')


class VisibilityMask(object):
    """Texels (or pixels) whose bound face is visible in the interrogated view"""

    def __init__(self, visible):
        self.visible = np.asarray(visible, dtype=bool)

    @property
    def shape(self):
        return self.visible.shape

    def fraction(self, within=None):
        if within is None:
            return float(self.visible.mean())
        within = np.asarray(within, dtype=bool)
        return float(self.visible[within].mean()) if within.any() else 0.0


class UnifiedTexture(object):
    """The unified-space texture image and its fill state"""

    def __init__(self, image, filled, layout):
        """
        @type  image:  Array (S, S, 4) uint8
        @param image:  RGBA atlas image
        @type  filled: Array (S, S) of bool
        @param filled: Texels carrying texture
        @type  layout: AtlasLayout
        @param layout: Layout the atlas was assembled against
        """

        self.image = np.asarray(image, dtype=np.uint8)
        self.filled = np.asarray(filled, dtype=bool)
        self.layout = layout

        if self.image.shape[:2] != self.filled.shape:
            raise SizeMismatch('atlas image {} vs fill mask {}'.format(self.image.shape[:2], self.filled.shape))


class TopologyMap(object):
    """Atlas-space barycenter of the face visible at each target pixel"""

    def __init__(self, values):
        values = np.array(values, dtype=np.float32, copy=True)
        if values.ndim != 3 or values.shape[2] != 2:
            raise InputError('topology map must be (H, W, 2), got {}'.format(values.shape))
        self.values = values

    @property
    def valid(self):
        return np.isfinite(self.values).all(axis=2)

    @property
    def shape(self):
        return self.values.shape[:2]

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]


class LayerSet(object):
    """Background, object and hand layers plus the two fusion masks"""

    def __init__(self, background, obj, hand, mask_hand, mask_foreground):
        """
        @type  background:      Array (H, W, 4) uint8
        @param background:      I_b
        @type  obj:             Array (H, W, 4) uint8
        @param obj:             I_o
        @type  hand:            Array (H, W, 4) uint8
        @param hand:            I_h
        @type  mask_hand:       Array (H, W) of bool
        @param mask_hand:       M_h, unoccluded hand
        @type  mask_foreground: Array (H, W) of bool
        @param mask_foreground: M_f, hand-object foreground
        """

        self.background = np.asarray(background)
        self.object = np.asarray(obj)
        self.hand = np.asarray(hand)
        self.mask_hand = np.asarray(mask_hand, dtype=bool)
        self.mask_foreground = np.asarray(mask_foreground, dtype=bool)

    @property
    def shape(self):
        return self.mask_foreground.shape

    def validate(self):
        """
        @raise SizeMismatch: The five members disagree on resolution.
        @raise InputError:   M_h is not contained in M_f.
        """

        shape = self.shape
        for name in ('background', 'object', 'hand'):
            if getattr(self, name).shape[:2] != shape:
                raise SizeMismatch('{} layer is {}, masks are {}'.format(name, getattr(self, name).shape[:2], shape))

        if self.mask_hand.shape != shape:
            raise SizeMismatch('hand mask is {}, foreground mask is {}'.format(self.mask_hand.shape, shape))

        if (self.mask_hand & ~self.mask_foreground).any():
            raise InputError('hand mask is not contained in the foreground mask')


def instance_of_faces(counts):
    """
    @type  counts: List of (Instance, Integer)
    @param counts: Face count per instance, in combined face order

    @rtype:  Array of uint8
    @return: Instance label of every combined face index.
    """

    return np.concatenate([np.full(count, int(Instance(label)), dtype=np.uint8) for label, count in counts]
                          or [np.zeros(0, dtype=np.uint8)])
