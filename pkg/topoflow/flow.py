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
Occlusion-aware topology modeling.

Model-derived flow fields between the source image (s), the unified surface
space (u) and the target image (t), the visibility of unified texels in the
source view, backward warping, unified texture assembly, the coarse target
image, the topology map and the composed target-from-source flow used to
warp the source hand.

The visibility mask keeps a texel when the face visible at the flowed source
pixel is the texel's own face. The inequality form of the face comparison
would erase exactly the texture that is visible, so the mask here is the
visibility (face equality) reading.
"""

import numpy as np
from scipy import ndimage

from topoflow.buffers import FlowField, VisibilityMask, UnifiedTexture, TopologyMap
from topoflow.defines import Instance, DEFAULT_DILATION
from topoflow.errors import (
    IndexOutOfRange, SizeMismatch, MissingObjectTexture, MissingUVs, LayoutMismatch, InputError,
)
from topoflow.log import get_logger

logger = get_logger(__name__)

BILINEAR = 'bilinear'
NEAREST = 'nearest'


def _interpolate_corners(raster, corners):
    """
    sum_i W_i(x, y) * corners[F(x, y), i] at every covered pixel.

    @rtype:  Tuple
    @return: (Array (H, W, 2) float64 with NaN off coverage, covered mask)
    """

    covered = raster.face >= 0
    out = np.full(raster.shape + (2,), np.nan, dtype=np.float64)

    if covered.any():
        tri = corners[raster.face[covered]]            # (K, 3, 2)
        weights = raster.bary[covered]                 # (K, 3)
        out[covered] = np.einsum('ki,kij->kj', weights, tri)

    return out, covered


def flow_unified_from_source(u_raster, source_screen, faces, layout=None) -> FlowField:
    """
    T_{u<-s}: for every atlas texel, the source image position of the
    surface point bound to it.

    @type  u_raster:      RasterBuffers
    @param u_raster:      Rasterization of the atlas triangles P^u
    @type  source_screen: Array (N_v, 3)
    @param source_screen: Source screen coordinates P^s of every vertex
    @type  faces:         Array (N_f, 3)
    @param faces:         Combined face list
    @type  layout:        AtlasLayout
    @param layout:        (Optional) Layout recorded on the flow

    @raise IndexOutOfRange: A face references a missing screen coordinate.
    @rtype:  FlowField
    @return: Atlas-sized flow into source pixel coordinates.
    """

    source_screen = np.asarray(source_screen, dtype=np.float64).reshape(-1, 3)
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    used = u_raster.face[u_raster.face >= 0]

    if len(used) and used.max() >= len(faces):
        raise IndexOutOfRange('atlas face {} beyond {} faces'.format(int(used.max()), len(faces)))

    if len(faces) and (faces.min() < 0 or faces.max() >= len(source_screen)):
        raise IndexOutOfRange('face references vertex {} of {} screen coordinates'.format(
            int(faces.max()), len(source_screen)))

    corners = source_screen[faces][:, :, :2]
    vectors, covered = _interpolate_corners(u_raster, corners)

    return FlowField(vectors, covered, layout=layout, kind='u<-s')


def nearest_pixel(vectors, width: int, height: int):
    """
    Pixel containing each continuous coordinate.

    @rtype:  Tuple
    @return: (column, row, in-bounds mask); indices are clipped where out of bounds.
    """

    with np.errstate(invalid='ignore'):
        col = np.floor(vectors[..., 0])
        row = np.floor(vectors[..., 1])
        inside = (col >= 0) & (col < width) & (row >= 0) & (row < height)

    col = np.clip(np.nan_to_num(col, nan=0.0), 0, width - 1).astype(np.int64)
    row = np.clip(np.nan_to_num(row, nan=0.0), 0, height - 1).astype(np.int64)

    return col, row, inside


def visibility_unified_from_source(u_raster, s_raster, flow: FlowField) -> VisibilityMask:
    """
    A texel is visible iff its flow is valid, lands on an in-bounds source
    pixel, and the face visible at that pixel (nearest pixel lookup) is the
    texel's own face.

    @rtype:  VisibilityMask
    @return: Atlas-sized visibility.
    """

    if flow.shape != u_raster.shape:
        raise SizeMismatch('flow {} vs atlas raster {}'.format(flow.shape, u_raster.shape))

    col, row, inside = nearest_pixel(flow.vectors, s_raster.width, s_raster.height)
    visible = flow.valid & inside & (u_raster.face >= 0) & (s_raster.face[row, col] == u_raster.face)

    logger.debug('visible texels: {} of {} filled'.format(int(visible.sum()), int((u_raster.face >= 0).sum())))

    return VisibilityMask(visible)


def as_rgba(image):
    """
    @rtype:  Array (H, W, 4) uint8
    @return: The image with an opaque alpha channel added when missing.
    """

    image = np.asarray(image)

    if image.ndim == 2:
        image = np.stack([image] * 3, axis=2)

    if image.ndim != 3 or image.shape[2] not in (3, 4):
        raise InputError('expected an RGB or RGBA image, got shape {}'.format(image.shape))

    if image.shape[2] == 3:
        alpha = np.full(image.shape[:2] + (1,), 255, dtype=image.dtype)
        image = np.concatenate([image, alpha], axis=2)

    return image.astype(np.uint8, copy=False)


def _to_uint8(values):
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)


def warp(flow: FlowField, image, mode: str = BILINEAR, size=None):
    """
    Backward warp: output(x, y) = sample(image, flow(x, y)).

    Bilinear sampling clamps coordinates to the image border and interpolates
    colors weighted by alpha, so transparent texels do not darken their
    neighbors. Invalid flow entries produce transparent black.

    @type  flow:  FlowField
    @param flow:  Coordinates into the image's pixel space
    @type  image: Array (H, W, 3|4) uint8
    @param image: Image to sample
    @type  mode:  String
    @param mode:  (Optional, def='bilinear') 'bilinear' or 'nearest'
    @type  size:  Tuple (width, height)
    @param size:  (Optional, def=flow size) Requested output size

    @raise SizeMismatch: size disagrees with the flow.
    @rtype:  Array (flow H, flow W, 4) uint8
    @return: Warped RGBA image.
    """

    if size is not None and (int(size[0]), int(size[1])) != (flow.width, flow.height):
        raise SizeMismatch('flow is {}x{}, requested {}x{}'.format(flow.width, flow.height, size[0], size[1]))

    image = as_rgba(image)
    height, width = image.shape[:2]
    out = np.zeros(flow.shape + (4,), dtype=np.uint8)
    valid = flow.valid

    if not valid.any():
        return out

    x = flow.vectors[..., 0][valid].astype(np.float64)
    y = flow.vectors[..., 1][valid].astype(np.float64)

    if mode == NEAREST:
        col = np.clip(np.floor(x), 0, width - 1).astype(np.int64)
        row = np.clip(np.floor(y), 0, height - 1).astype(np.int64)
        out[valid] = image[row, col]
        return out

    if mode != BILINEAR:
        raise InputError('unknown warp mode {!r}'.format(mode))

    # pixel centers sit at integer + 0.5.
    x = np.clip(x - 0.5, 0.0, width - 1.0)
    y = np.clip(y - 0.5, 0.0, height - 1.0)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    x1 = np.minimum(x0 + 1, width - 1)
    y1 = np.minimum(y0 + 1, height - 1)
    fx = (x - x0)[:, None]
    fy = (y - y0)[:, None]

    pixels = image.astype(np.float64)
    color = np.zeros((len(x), 3))
    alpha = np.zeros((len(x), 1))

    for rows, cols, weight in ((y0, x0, (1 - fx) * (1 - fy)), (y0, x1, fx * (1 - fy)),
                               (y1, x0, (1 - fx) * fy), (y1, x1, fx * fy)):
        sample = pixels[rows, cols]
        a = sample[:, 3:4] * weight
        color += sample[:, :3] * a
        alpha += a

    with np.errstate(invalid='ignore', divide='ignore'):
        color = np.where(alpha > 0, color / alpha, 0.0)

    out[valid] = _to_uint8(np.concatenate([color, alpha], axis=1))

    return out


def dilate(image, filled, iterations: int = DEFAULT_DILATION):
    """
    Grow the filled region by one texel per iteration; every newly filled
    texel takes the mean of its already filled 8-neighbors.

    @rtype:  Tuple
    @return: (dilated image, dilated fill mask)
    """

    image = np.array(image, dtype=np.uint8, copy=True)
    filled = np.array(filled, dtype=bool, copy=True)
    kernel = np.ones((3, 3))
    kernel[1, 1] = 0

    for _ in range(int(iterations)):
        known = filled.astype(np.float64)
        counts = ndimage.convolve(known, kernel, mode='constant', cval=0.0)
        ring = ~filled & (counts > 0)

        if not ring.any():
            break

        sums = np.stack([ndimage.convolve(image[..., ch] * known, kernel, mode='constant', cval=0.0)
                         for ch in range(4)], axis=2)
        image[ring] = _to_uint8(sums[ring] / counts[ring][:, None])
        filled |= ring

    return image, filled


def object_texture_flow(u_raster, layout) -> FlowField:
    """
    Flow from object texels of the atlas into the pre-stored texture,
    expressed in normalized texture coordinates (u to the right, v down,
    both in [0, 1]). Scale by the texture size before warping.

    @raise MissingUVs: The object was placed with a generated grid atlas.
    """

    if layout.object_uv_source != 'obj':
        raise MissingUVs('object mesh has no texture coordinates to map its texture through')

    x0, y0, x1, y1 = layout.object_rect
    xs, ys = np.meshgrid(np.arange(u_raster.width) + 0.5, np.arange(u_raster.height) + 0.5)
    vectors = np.stack([(xs - x0) / (x1 - x0), (ys - y0) / (y1 - y0)], axis=2)

    return FlowField(vectors, u_raster.instance == Instance.OBJECT, layout=layout, kind='texture<-u')


def assemble_unified_texture(source_image, flow: FlowField, visibility: VisibilityMask, object_texture,
                             layout, u_raster, dilation: int = DEFAULT_DILATION) -> UnifiedTexture:
    """
    Assemble the unified texture: visible source texture for hand texels,
    the pre-stored texture for object texels (source object pixels are never
    used), then a dilation pass over the unfilled neighbors.

    @type  source_image:   Array (H, W, 3|4) uint8
    @param source_image:   Source frame
    @type  flow:           FlowField
    @param flow:           T_{u<-s}
    @type  visibility:     VisibilityMask
    @param visibility:     Visibility of texels in the source view
    @type  object_texture: Array (h, w, 3|4) uint8
    @param object_texture: Pre-stored object texture, None without an object
    @type  layout:         AtlasLayout
    @param layout:         Layout of the unified space
    @type  u_raster:       RasterBuffers
    @param u_raster:       Rasterization of the atlas triangles
    @type  dilation:       Integer
    @param dilation:       (Optional, def=2) Dilation passes, 0 disables

    @raise MissingObjectTexture: The atlas holds object texels but no texture was given.
    @raise MissingUVs:           The object has no texture coordinates.
    @rtype:  UnifiedTexture
    @return: Assembled atlas.
    """

    if flow.shape != u_raster.shape or visibility.shape != u_raster.shape:
        raise SizeMismatch('flow {}, visibility {} and atlas raster {} disagree'.format(
            flow.shape, visibility.shape, u_raster.shape))

    image = np.zeros(u_raster.shape + (4,), dtype=np.uint8)
    filled = np.zeros(u_raster.shape, dtype=bool)

    hand = (u_raster.instance == Instance.HAND) & visibility.visible & flow.valid
    if hand.any():
        warped = warp(flow, source_image, BILINEAR)
        image[hand] = warped[hand]
        filled |= hand

    objects = u_raster.instance == Instance.OBJECT
    if objects.any():
        if object_texture is None:
            raise MissingObjectTexture('scene declares an object but no object texture')

        texture = as_rgba(object_texture)
        tex_flow = object_texture_flow(u_raster, layout)
        scaled = tex_flow.vectors * np.array([texture.shape[1], texture.shape[0]], dtype=np.float32)
        sampled = warp(FlowField(scaled, tex_flow.valid), texture, BILINEAR)
        image[objects] = sampled[objects]
        filled |= objects

    logger.debug('atlas filled: {} hand texels, {} object texels'.format(int(hand.sum()), int(objects.sum())))

    if dilation > 0:
        image, filled = dilate(image, filled, dilation)

    return UnifiedTexture(image, filled, layout)


def flow_target_from_unified(t_raster, atlas_uvs, layout=None) -> FlowField:
    """
    T_{t<-u}: for every target pixel, the atlas position of the surface
    point visible there.

    @raise MissingUVs: A rasterized face has no atlas coordinates.
    @rtype:  FlowField
    @return: Target-sized flow into atlas pixel coordinates.
    """

    atlas_uvs = _check_atlas_uvs(t_raster, atlas_uvs)
    vectors, covered = _interpolate_corners(t_raster, atlas_uvs)

    return FlowField(vectors, covered, layout=layout, kind='t<-u')


def _check_atlas_uvs(raster, atlas_uvs):
    if atlas_uvs is None:
        raise MissingUVs('no atlas coordinates given')

    atlas_uvs = np.asarray(atlas_uvs, dtype=np.float64).reshape(-1, 3, 2)
    used = np.unique(raster.face[raster.face >= 0])

    if len(used) and used[-1] >= len(atlas_uvs):
        raise MissingUVs('face {} has no atlas coordinates ({} faces mapped)'.format(int(used[-1]), len(atlas_uvs)))

    if len(used) and not np.isfinite(atlas_uvs[used]).all():
        raise MissingUVs('rasterized faces with non-finite atlas coordinates')

    return atlas_uvs


def synthesize_coarse_target(flow: FlowField, texture: UnifiedTexture):
    """
    I_t = Warp(T_{t<-u}, unified texture), bilinear. Pixels with an invalid
    flow stay transparent.

    @raise LayoutMismatch: The flow was computed against another layout.
    """

    if flow.layout is not None and texture.layout is not None and flow.layout != texture.layout:
        raise LayoutMismatch('coarse target flow and unified texture use different atlas layouts')

    return warp(flow, texture.image, BILINEAR)


def topology_map(t_raster, atlas_uvs) -> TopologyMap:
    """
    Y_t: the atlas barycenter of the face visible at each target pixel, NaN
    on background.

    @raise MissingUVs: A rasterized face has no atlas coordinates.
    """

    atlas_uvs = _check_atlas_uvs(t_raster, atlas_uvs)
    centers = atlas_uvs.mean(axis=1)

    values = np.full(t_raster.shape + (2,), np.nan, dtype=np.float64)
    covered = t_raster.face >= 0
    values[covered] = centers[t_raster.face[covered]]

    return TopologyMap(values)


def split_topology_map(topology: TopologyMap, t_raster):
    """
    Per-instance topology maps, as consumed separately by the hand and the
    object generators.

    @rtype:  Dict
    @return: Instance -> TopologyMap holding only that instance's pixels.
    """

    maps = {}
    for instance in (Instance.HAND, Instance.OBJECT):
        values = topology.values.copy()
        values[t_raster.instance != instance] = np.nan
        maps[instance] = TopologyMap(values)

    return maps


def compose_flow_target_from_source(flow_tu: FlowField, flow_us: FlowField, visibility: VisibilityMask,
                                    u_raster) -> FlowField:
    """
    T_{t<-s}: the pose transformation flow carrying source pixels to the
    target. Each target pixel is looked up in the atlas through T_{t<-u},
    resolved to its nearest texel, and carried on through T_{u<-s}. The value
    is the bilinear interpolation of T_{u<-s} over the neighboring texels of
    the same face; validity requires both flows valid and the resolving
    texel visible in the source.

    When the nearest texel lies in the rasterization gap along its triangle
    edge (no face), the heaviest bilinear neighbor that has a face resolves
    the pixel instead.

    @raise LayoutMismatch: The two flows come from different atlas layouts.
    @rtype:  FlowField
    @return: Target-sized flow into source pixel coordinates.
    """

    if flow_tu.layout is not None and flow_us.layout is not None and flow_tu.layout != flow_us.layout:
        raise LayoutMismatch('T_t<-u and T_u<-s come from different atlas layouts')

    if flow_us.shape != u_raster.shape or visibility.shape != u_raster.shape:
        raise LayoutMismatch('atlas flow {} / visibility {} do not match atlas raster {}'.format(
            flow_us.shape, visibility.shape, u_raster.shape))

    out = np.full(flow_tu.shape + (2,), np.nan, dtype=np.float64)
    valid_out = np.zeros(flow_tu.shape, dtype=bool)
    pixels = flow_tu.valid

    if not pixels.any():
        return FlowField(out, valid_out, layout=flow_tu.layout or flow_us.layout, kind='t<-s')

    width, height = u_raster.width, u_raster.height
    face_u = u_raster.face
    usable = flow_us.valid & visibility.visible & (face_u >= 0)
    values_us = np.where(flow_us.valid[..., None], flow_us.vectors, 0.0).astype(np.float64)

    u = flow_tu.vectors[..., 0][pixels].astype(np.float64)
    v = flow_tu.vectors[..., 1][pixels].astype(np.float64)

    # bilinear neighborhood around (u - 0.5, v - 0.5).
    bx = np.floor(u - 0.5)
    by = np.floor(v - 0.5)
    fx = (u - 0.5) - bx
    fy = (v - 0.5) - by
    bx = bx.astype(np.int64)
    by = by.astype(np.int64)

    neighbors = []
    for dx, dy, weight in ((0, 0, (1 - fx) * (1 - fy)), (1, 0, fx * (1 - fy)),
                           (0, 1, (1 - fx) * fy), (1, 1, fx * fy)):
        cols = bx + dx
        rows = by + dy
        inside = (cols >= 0) & (cols < width) & (rows >= 0) & (rows < height)
        cols = np.clip(cols, 0, width - 1)
        rows = np.clip(rows, 0, height - 1)
        weight = np.where(inside, weight, 0.0)
        face = np.where(inside, face_u[rows, cols], -1)
        neighbors.append((rows, cols, weight, face))

    # resolving texel: the nearest one, else the heaviest neighbor with a face.
    col_q, row_q, inside_q = nearest_pixel(np.stack([u, v], axis=1), width, height)
    face_q = np.where(inside_q, face_u[row_q, col_q], -1)

    best_weight = np.full(len(u), -1.0)
    for rows, cols, weight, face in neighbors:
        better = (face_q < 0) & (face >= 0) & (weight > best_weight)
        row_q = np.where(better, rows, row_q)
        col_q = np.where(better, cols, col_q)
        best_weight = np.where(better, weight, best_weight)

    resolved = (face_q >= 0) | (best_weight >= 0)
    face_q = face_u[row_q, col_q]
    gate = resolved & (face_q >= 0) & usable[row_q, col_q]

    total = np.zeros(len(u))
    accum = np.zeros((len(u), 2))
    for rows, cols, weight, face in neighbors:
        take = usable[rows, cols] & (face == face_q)
        w = np.where(take, weight, 0.0)
        total += w
        accum += values_us[rows, cols] * w[:, None]

    # the resolving texel is always among the neighbors when it is the nearest;
    # fall back to its own value otherwise.
    own = values_us[row_q, col_q]
    with np.errstate(invalid='ignore', divide='ignore'):
        composed = np.where((total > 0)[:, None], accum / total[:, None], own)

    result = np.full((len(u), 2), np.nan)
    result[gate] = composed[gate]
    out[pixels] = result
    valid_out[pixels] = gate

    logger.debug('composed flow valid on {} of {} target foreground pixels'.format(int(gate.sum()), len(u)))

    return FlowField(out, valid_out, layout=flow_tu.layout or flow_us.layout, kind='t<-s')
