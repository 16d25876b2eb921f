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
Split-and-combine fusion with geometric masks.

The hand mask and the foreground mask come straight from the target
rasterization: the z-buffer has already resolved hand-object occlusion, so a
pixel whose visible surface belongs to the hand is an unoccluded hand pixel.
"""

import numpy as np
from scipy import ndimage

from topoflow.buffers import LayerSet
from topoflow.defines import Instance
from topoflow.errors import AllForeground, NoVisibleHand, SizeMismatch
from topoflow.log import get_logger

logger = get_logger(__name__)

_NEIGHBORS = np.array([[1, 1, 1], [1, 0, 1], [1, 1, 1]], dtype=np.float64)


def analytic_masks(t_raster):
    """
    @rtype:  Tuple
    @return: (M_h, M_f) boolean grids: hand visible, any foreground.
    """

    mask_foreground = t_raster.face >= 0
    mask_hand = mask_foreground & (t_raster.instance == Instance.HAND)

    return mask_hand, mask_foreground


def fuse(layers: LayerSet):
    """
    I = (I_h * M_h + I_o * (1 - M_h)) * M_f + I_b * (1 - M_f), per pixel and
    channel, masks taken as {0, 1}.

    @raise SizeMismatch: Layers and masks disagree on resolution.
    @rtype:  Array (H, W, C)
    @return: Fused image, in the dtype of the layers.
    """

    layers.validate()

    dtype = np.result_type(layers.hand, layers.object, layers.background)
    work = np.int64 if np.issubdtype(dtype, np.integer) else np.float64

    hand = layers.hand.astype(work)
    obj = layers.object.astype(work)
    background = layers.background.astype(work)

    if not (hand.shape == obj.shape == background.shape):
        raise SizeMismatch('layer channel counts differ: {} {} {}'.format(hand.shape, obj.shape, background.shape))

    m_h = layers.mask_hand.astype(work)
    m_f = layers.mask_foreground.astype(work)
    if hand.ndim == 3:
        m_h = m_h[..., None]
        m_f = m_f[..., None]

    fused = (hand * m_h + obj * (1 - m_h)) * m_f + background * (1 - m_f)

    return fused.astype(dtype)


def inpaint_background(image, mask):
    """
    Onion-peel hole filling. Each pass fills the ring of hole pixels that
    touch known pixels; every ring pixel takes the mean of its known
    8-neighbors as they stood before the pass, so the result does not depend
    on a scan order. Passes repeat until no hole is left.

    @type  image: Array (H, W, C) uint8
    @param image: Source frame
    @type  mask:  Array (H, W) of bool
    @param mask:  True on the hand-object foreground to remove

    @raise AllForeground: No background pixel to grow from.
    @rtype:  Array (H, W, C) uint8
    @return: Image with the masked pixels filled; other pixels untouched.
    """

    image = np.asarray(image)
    mask = np.asarray(mask, dtype=bool)

    if mask.shape != image.shape[:2]:
        raise SizeMismatch('mask {} for image {}'.format(mask.shape, image.shape[:2]))

    if not mask.any():
        return image.copy()

    if mask.all():
        raise AllForeground('every pixel is foreground, nothing to inpaint from')

    values = image.astype(np.float64)
    if values.ndim == 2:
        values = values[..., None]

    known = ~mask
    passes = 0

    while not known.all():
        weight = known.astype(np.float64)
        counts = ndimage.convolve(weight, _NEIGHBORS, mode='constant', cval=0.0)
        ring = ~known & (counts > 0)

        sums = np.stack([ndimage.convolve(values[..., ch] * weight, _NEIGHBORS, mode='constant', cval=0.0)
                         for ch in range(values.shape[2])], axis=2)
        values[ring] = sums[ring] / counts[ring][:, None]
        known = known | ring
        passes += 1

    logger.debug('inpainted {} pixels in {} passes'.format(int(mask.sum()), passes))

    out = image.copy()
    filled = np.clip(np.rint(values), 0, 255).astype(image.dtype)
    if image.ndim == 2:
        filled = filled[..., 0]
    out[mask] = filled[mask]

    return out


def fill_hand_holes(coarse_hand, t_raster, valid):
    """
    Fill target hand pixels that received no source texture: each takes the
    mean color of the valid pixels of its own face, or the mean of all valid
    hand pixels when its face has none.

    @type  coarse_hand: Array (H, W, 4) uint8
    @param coarse_hand: Source hand warped through T_{t<-s}
    @type  t_raster:    RasterBuffers
    @param t_raster:    Target rasterization
    @type  valid:       Array (H, W) of bool
    @param valid:       Pixels carrying source-visible texture

    @raise NoVisibleHand: Hand pixels exist but none is valid.
    @rtype:  Array (H, W, 4) uint8
    @return: Hole-filled hand layer.
    """

    coarse_hand = np.asarray(coarse_hand)
    valid = np.asarray(valid, dtype=bool)

    if coarse_hand.shape[:2] != t_raster.shape or valid.shape != t_raster.shape:
        raise SizeMismatch('hand layer {}, validity {} and target raster {} disagree'.format(
            coarse_hand.shape[:2], valid.shape, t_raster.shape))

    hand = (t_raster.face >= 0) & (t_raster.instance == Instance.HAND)
    holes = hand & ~valid
    out = coarse_hand.copy()

    if not holes.any():
        return out

    good = hand & valid
    if not good.any():
        raise NoVisibleHand('no target hand pixel has source-visible texture')

    faces = t_raster.face[good]
    colors = coarse_hand[good].astype(np.float64)
    size = int(t_raster.face.max()) + 1

    counts = np.bincount(faces, minlength=size).astype(np.float64)
    sums = np.stack([np.bincount(faces, weights=colors[:, ch], minlength=size)
                     for ch in range(colors.shape[1])], axis=1)
    global_mean = colors.mean(axis=0)

    hole_faces = t_raster.face[holes]
    has_own = counts[hole_faces] > 0
    fill = np.empty((len(hole_faces), colors.shape[1]))
    fill[has_own] = sums[hole_faces[has_own]] / counts[hole_faces[has_own]][:, None]
    fill[~has_own] = global_mean

    out[holes] = np.clip(np.rint(fill), 0, 255).astype(coarse_hand.dtype)

    logger.debug('filled {} hand pixels ({} from face means)'.format(len(hole_faces), int(has_own.sum())))

    return out
