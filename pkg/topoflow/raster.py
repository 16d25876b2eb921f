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
Deterministic software rasterizer.

A pixel is covered by a triangle iff its center lies inside it; centers
exactly on an edge belong to the triangle only when that edge is a top or
left edge. The visible face minimizes the depth interpolated linearly in
screen space, equal depths keep the lower face index. There is no back-face
culling. The image is split into row tiles which may be processed by a
thread pool; every tile writes a disjoint band and faces are always visited
in index order, so the output does not depend on the tiling or the number of
threads.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from topoflow.buffers import RasterBuffers
from topoflow.defines import BACKGROUND_FACE, DEGENERATE_AREA_2D
from topoflow.errors import DegenerateTriangle, InputError
from topoflow.log import get_logger

logger = get_logger(__name__)

DEFAULT_TILE_ROWS = 32


def edge_function(px, py, ax, ay, bx, by):
    # twice the signed area of (a, b, p); positive on the interior side of a
    # triangle with positive area in y-down screen coordinates.
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


def barycentric(p, a, b, c):
    """
    Barycentric coordinates of a 2D point.

    @type  p: Tuple (x, y)
    @param p: Query point
    @type  a: Tuple (x, y)
    @param a: First triangle corner
    @type  b: Tuple (x, y)
    @param b: Second triangle corner
    @type  c: Tuple (x, y)
    @param c: Third triangle corner

    @raise DegenerateTriangle: |cross(b - a, c - a)| <= 1e-12.
    @rtype:  Tuple
    @return: (w0, w1, w2) with w0 a + w1 b + w2 c = p and w0 + w1 + w2 = 1.
    """

    area = edge_function(c[0], c[1], a[0], a[1], b[0], b[1])

    if not abs(area) > DEGENERATE_AREA_2D:
        raise DegenerateTriangle('triangle {} {} {} has area {!r}'.format(a, b, c, area))

    w0 = edge_function(p[0], p[1], b[0], b[1], c[0], c[1]) / area
    w1 = edge_function(p[0], p[1], c[0], c[1], a[0], a[1]) / area

    return w0, w1, 1.0 - w0 - w1


def is_top_left(dx, dy):
    # for positive-area triangles in y-down coordinates: a top edge runs
    # horizontally to the right, a left edge runs upwards.
    return (dy == 0 and dx > 0) or dy < 0


class _Setup(object):
    """Per-face data shared by all tiles"""

    __slots__ = ('corners', 'z', 'area', 'perm', 'top_left', 'x0', 'x1', 'y0', 'y1')

    def __init__(self, corners, z, area, perm, top_left, bounds):
        self.corners = corners
        self.z = z
        self.area = area
        self.perm = perm
        self.top_left = top_left
        self.x0, self.x1, self.y0, self.y1 = bounds


def _setup_faces(screen, faces, skip, width, height):
    setups = []

    for index, (ia, ib, ic) in enumerate(faces):
        if skip is not None and skip[index]:
            setups.append(None)
            continue

        tri = screen[[ia, ib, ic]]

        if not np.isfinite(tri).all():
            setups.append(None)
            continue

        (ax, ay, za), (bx, by, zb), (cx, cy, zc) = tri.tolist()
        area = edge_function(cx, cy, ax, ay, bx, by)

        if not abs(area) > DEGENERATE_AREA_2D:
            setups.append(None)
            continue

        perm = (0, 1, 2)
        if area < 0:
            # make the area positive; weights are permuted back afterwards.
            bx, by, zb, cx, cy, zc = cx, cy, zc, bx, by, zb
            area = -area
            perm = (0, 2, 1)

        # pixel i is covered only if its center i + 0.5 lies within the bounds.
        x0 = max(int(np.ceil(min(ax, bx, cx) - 0.5)), 0)
        x1 = min(int(np.floor(max(ax, bx, cx) - 0.5)), width - 1)
        y0 = max(int(np.ceil(min(ay, by, cy) - 0.5)), 0)
        y1 = min(int(np.floor(max(ay, by, cy) - 0.5)), height - 1)

        if x0 > x1 or y0 > y1:
            setups.append(None)
            continue

        top_left = (
            is_top_left(cx - bx, cy - by),   # edge b -> c, weight of a
            is_top_left(ax - cx, ay - cy),   # edge c -> a, weight of b
            is_top_left(bx - ax, by - ay),   # edge a -> b, weight of c
        )

        setups.append(_Setup((ax, ay, bx, by, cx, cy), (za, zb, zc), area, perm, top_left, (x0, x1, y0, y1)))

    return setups


def _inside(edge, top_left):
    return edge >= 0 if top_left else edge > 0


def _raster_tile(setups, width, row0, row1, out_face, out_bary, out_depth):
    rows = row1 - row0
    face = np.full((rows, width), BACKGROUND_FACE, dtype=np.int32)
    depth = np.full((rows, width), np.inf, dtype=np.float64)
    bary = np.zeros((rows, width, 3), dtype=np.float64)

    for index, setup in enumerate(setups):
        if setup is None or setup.y1 < row0 or setup.y0 >= row1:
            continue

        y0 = max(setup.y0, row0)
        y1 = min(setup.y1, row1 - 1)
        px, py = np.meshgrid(np.arange(setup.x0, setup.x1 + 1) + 0.5, np.arange(y0, y1 + 1) + 0.5)

        ax, ay, bx, by, cx, cy = setup.corners
        e0 = edge_function(px, py, bx, by, cx, cy)
        e1 = edge_function(px, py, cx, cy, ax, ay)
        e2 = edge_function(px, py, ax, ay, bx, by)

        inside = _inside(e0, setup.top_left[0]) & _inside(e1, setup.top_left[1]) & _inside(e2, setup.top_left[2])

        if not inside.any():
            continue

        w0 = e0 / setup.area
        w1 = e1 / setup.area
        w2 = e2 / setup.area
        za, zb, zc = setup.z
        z = w0 * za + w1 * zb + w2 * zc

        window = (slice(y0 - row0, y1 - row0 + 1), slice(setup.x0, setup.x1 + 1))
        wins = inside & (z < depth[window])

        if not wins.any():
            continue

        weights = np.stack([w0, w1, w2], axis=2)[:, :, list(setup.perm)]

        face[window][wins] = index
        depth[window][wins] = z[wins]
        bary[window][wins] = weights[wins]

    out_face[row0:row1] = face
    out_depth[row0:row1] = depth
    out_bary[row0:row1] = bary


def rasterize(screen_coords, faces, instance_of_face, size, skip=None, threads: int = 1,
              tile_rows: int = DEFAULT_TILE_ROWS) -> RasterBuffers:
    """
    Rasterize triangles into face, barycentric, depth and instance maps.

    @type  screen_coords:    Array (N_v, 3)
    @param screen_coords:    Per-vertex (x px, y px, z m)
    @type  faces:            Array (N_f, 3)
    @param faces:            Vertex index triples
    @type  instance_of_face: Array (N_f,)
    @param instance_of_face: Instance label of every face
    @type  size:             Tuple (width, height)
    @param size:             Buffer size in pixels
    @type  skip:             Array (N_f,) of bool
    @param skip:             (Optional) Faces to leave out, e.g. degenerate ones
    @type  threads:          Integer
    @param threads:          (Optional, def=1) Worker threads, does not change the output
    @type  tile_rows:        Integer
    @param tile_rows:        (Optional, def=32) Rows per tile, does not change the output

    @rtype:  RasterBuffers
    @return: Rasterized buffers. Empty input yields all-background buffers.
    """

    width, height = int(size[0]), int(size[1])

    if width < 1 or height < 1:
        raise InputError('raster size must be at least 1x1, got {}x{}'.format(width, height))

    screen = np.asarray(screen_coords, dtype=np.float64).reshape(-1, 3)
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    instance_of_face = np.asarray(instance_of_face, dtype=np.uint8).reshape(-1)

    if len(instance_of_face) != len(faces):
        raise InputError('{} instance labels for {} faces'.format(len(instance_of_face), len(faces)))

    if len(faces) and (faces.min() < 0 or faces.max() >= len(screen)):
        raise InputError('face index out of range for {} screen coordinates'.format(len(screen)))

    face = np.empty((height, width), dtype=np.int32)
    bary = np.empty((height, width, 3), dtype=np.float64)
    depth = np.empty((height, width), dtype=np.float64)

    setups = _setup_faces(screen, faces, skip, width, height)
    tile_rows = max(int(tile_rows), 1)
    tiles = [(row0, min(row0 + tile_rows, height)) for row0 in range(0, height, tile_rows)]

    def work(tile):
        _raster_tile(setups, width, tile[0], tile[1], face, bary, depth)

    if threads > 1 and len(tiles) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, tiles))
    else:
        for tile in tiles:
            work(tile)

    covered = face >= 0
    instance = np.zeros((height, width), dtype=np.uint8)
    instance[covered] = instance_of_face[face[covered]]

    logger.debug('rasterized {} faces into {}x{}, {} tiles, {} threads, coverage {:.3f}'.format(
        len(faces), width, height, len(tiles), threads, covered.mean()))

    return RasterBuffers(width, height, face, bary, depth.astype(np.float32), instance)


def rasterize_atlas(atlas_uvs, instance_of_face, atlas_size: int, threads: int = 1) -> RasterBuffers:
    """
    Rasterize the atlas triangles P^u themselves, so F^u(x, y) is the face
    that owns the texel by construction. All triangles sit at unit depth;
    where atlas triangles overlap the lower face index keeps the texel.

    @type  atlas_uvs:        Array (N_f, 3, 2)
    @param atlas_uvs:        Atlas pixel coordinates of every face corner
    @type  instance_of_face: Array (N_f,)
    @param instance_of_face: Instance label of every face
    @type  atlas_size:       Integer
    @param atlas_size:       Atlas side in pixels

    @rtype:  RasterBuffers
    @return: F^u, W^u and the instance layout of the unified space.
    """

    atlas_uvs = np.asarray(atlas_uvs, dtype=np.float64).reshape(-1, 3, 2)
    count = len(atlas_uvs)

    screen = np.ones((count * 3, 3), dtype=np.float64)
    screen[:, :2] = atlas_uvs.reshape(-1, 2)
    faces = np.arange(count * 3).reshape(-1, 3)

    return rasterize(screen, faces, instance_of_face, (atlas_size, atlas_size), threads=threads)
