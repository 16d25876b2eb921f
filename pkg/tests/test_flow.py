import numpy as np
import pytest

from topoflow.atlas import AtlasLayout, grid_face_uvs_px
from topoflow.buffers import FlowField, VisibilityMask, UnifiedTexture, RasterBuffers
from topoflow.defines import Instance
from topoflow.errors import IndexOutOfRange, MissingObjectTexture, MissingUVs, LayoutMismatch, SizeMismatch
from topoflow.flow import (
    flow_unified_from_source, visibility_unified_from_source, warp, dilate, assemble_unified_texture,
    flow_target_from_unified, synthesize_coarse_target, topology_map, split_topology_map,
    compose_flow_target_from_source, NEAREST,
)
from topoflow.raster import rasterize, rasterize_atlas


def solid(height, width, color):
    image = np.empty((height, width, 4), dtype=np.uint8)
    image[...] = color
    return image


def two_face_setup():
    """
    Two triangles in the source frame: face 0 in front covering the left
    part, face 1 behind it and partially hidden. Each owns one atlas
    triangle.
    """

    source_screen = np.array([
        [2.0, 2.0, 1.0], [20.0, 2.0, 1.0], [2.0, 20.0, 1.0],
        [4.0, 4.0, 2.0], [30.0, 4.0, 2.0], [4.0, 30.0, 2.0],
    ])
    faces = np.array([[0, 1, 2], [3, 4, 5]])
    instances = np.array([Instance.HAND, Instance.HAND], dtype=np.uint8)
    atlas_uvs = np.array([
        [[1.0, 1.0], [30.0, 1.0], [1.0, 30.0]],
        [[33.0, 1.0], [62.0, 1.0], [33.0, 30.0]],
    ])

    s_raster = rasterize(source_screen, faces, instances, (32, 32))
    u_raster = rasterize_atlas(atlas_uvs, instances, 64)

    return source_screen, faces, atlas_uvs, s_raster, u_raster


def test_flow_unified_from_source_is_affine_per_face():
    source_screen, faces, atlas_uvs, _, u_raster = two_face_setup()

    flow = flow_unified_from_source(u_raster, source_screen, faces)

    np.testing.assert_array_equal(flow.valid, u_raster.covered)
    assert np.isnan(flow.vectors[~flow.valid]).all()

    # face 0: atlas (1,1)-(30,1)-(1,30) onto source (2,2)-(20,2)-(2,20).
    rows, cols = np.nonzero(u_raster.face == 0)
    expected_x = 2.0 + (cols + 0.5 - 1.0) * 18.0 / 29.0
    expected_y = 2.0 + (rows + 0.5 - 1.0) * 18.0 / 29.0
    np.testing.assert_allclose(flow.vectors[rows, cols, 0], expected_x, atol=1e-4)
    np.testing.assert_allclose(flow.vectors[rows, cols, 1], expected_y, atol=1e-4)


def test_flow_unified_from_source_inverts_to_texel_barycentrics():
    rng = np.random.default_rng(17)
    count = 40

    centers = rng.uniform(15.0, 85.0, (count, 1, 2))
    radii = rng.uniform(5.0, 20.0, (count, 1, 1))
    angles = rng.uniform(0.0, 2.0 * np.pi, (count, 1)) + np.array([0.0, 2.1, 4.2])
    corners = centers + radii * np.stack([np.cos(angles), np.sin(angles)], axis=2)
    source_screen = np.concatenate([corners.reshape(-1, 2), rng.uniform(0.5, 2.0, (count * 3, 1))], axis=1)
    faces = np.arange(count * 3).reshape(count, 3)

    atlas_uvs = grid_face_uvs_px(count, (0.0, 0.0, 256.0, 256.0), 1.0)[0]
    u_raster = rasterize_atlas(atlas_uvs, np.full(count, Instance.HAND, dtype=np.uint8), 256)

    flow = flow_unified_from_source(u_raster, source_screen, faces)

    rows, cols = np.nonzero(flow.valid)
    tri = source_screen[faces[u_raster.face[rows, cols]]][:, :, :2]
    point = flow.vectors[rows, cols].astype(np.float64)

    # solve point = a + w1 (b - a) + w2 (c - a) per texel.
    basis = np.stack([tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]], axis=2)
    w12 = np.linalg.solve(basis, (point - tri[:, 0])[:, :, None])[:, :, 0]
    weights = np.concatenate([1.0 - w12.sum(axis=1, keepdims=True), w12], axis=1)

    assert len(rows) > 1000
    np.testing.assert_allclose(weights, u_raster.bary[rows, cols], atol=1e-4)


def test_flow_unified_from_source_index_out_of_range():
    source_screen, faces, _, _, u_raster = two_face_setup()

    with pytest.raises(IndexOutOfRange):
        flow_unified_from_source(u_raster, source_screen[:4], faces)


def test_visibility_keeps_front_face_and_drops_hidden_texels():
    source_screen, faces, _, s_raster, u_raster = two_face_setup()
    flow = flow_unified_from_source(u_raster, source_screen, faces)

    visibility = visibility_unified_from_source(u_raster, s_raster, flow)

    front = u_raster.face == 0
    back = u_raster.face == 1
    # face 0 is never occluded; only texels on pixels it shares with an edge can drop out.
    assert visibility.fraction(within=front) > 0.8
    assert not visibility.visible[~u_raster.covered].any()

    # the part of face 1 behind face 0 is hidden, the rest is visible.
    col = np.floor(np.nan_to_num(flow.vectors[..., 0])).astype(int)
    row = np.floor(np.nan_to_num(flow.vectors[..., 1])).astype(int)
    hidden = back & (np.nan_to_num(flow.vectors[..., 0]) + np.nan_to_num(flow.vectors[..., 1]) < 19.0)
    assert hidden.any()
    assert not visibility.visible[hidden].any()
    assert visibility.visible[back].any()

    # visible texels always land on a source pixel of their own face.
    visible = visibility.visible
    np.testing.assert_array_equal(s_raster.face[row[visible], col[visible]], u_raster.face[visible])


def test_warp_identity_and_modes():
    rng = np.random.default_rng(3)
    image = rng.integers(0, 256, (6, 5, 4), dtype=np.uint8)
    image[..., 3] = 255

    identity = FlowField.identity(5, 6)
    np.testing.assert_array_equal(warp(identity, image), image)
    np.testing.assert_array_equal(warp(identity, image, NEAREST), image)

    with pytest.raises(SizeMismatch):
        warp(identity, image, size=(6, 6))


def test_warp_bilinear_midpoint_and_invalid():
    image = np.zeros((1, 2, 4), dtype=np.uint8)
    image[0, 0] = (100, 0, 0, 255)
    image[0, 1] = (200, 50, 0, 255)

    vectors = np.array([[[1.0, 0.5], [np.nan, np.nan]]], dtype=np.float32)
    out = warp(FlowField(vectors), image)

    np.testing.assert_array_equal(out[0, 0], (150, 25, 0, 255))
    np.testing.assert_array_equal(out[0, 1], (0, 0, 0, 0))


def test_warp_ignores_transparent_neighbors():
    image = np.zeros((1, 2, 4), dtype=np.uint8)
    image[0, 0] = (100, 100, 100, 255)

    out = warp(FlowField(np.array([[[1.0, 0.5]]])), image)

    np.testing.assert_array_equal(out[0, 0, :3], (100, 100, 100))
    assert out[0, 0, 3] == 128


def test_dilate_grows_one_ring_per_pass():
    image = np.zeros((7, 7, 4), dtype=np.uint8)
    filled = np.zeros((7, 7), dtype=bool)
    image[3, 3] = (90, 60, 30, 255)
    filled[3, 3] = True

    out, grown = dilate(image, filled, 1)
    assert grown.sum() == 9
    np.testing.assert_array_equal(out[2, 2], (90, 60, 30, 255))

    out, grown = dilate(image, filled, 2)
    assert grown.sum() == 25
    assert not grown[0].any()


def test_assemble_requires_object_texture():
    atlas_uvs = np.array([[[70.0, 10.0], [120.0, 10.0], [70.0, 60.0]]])
    layout = AtlasLayout(128)
    layout.object_uv_source = 'obj'
    u_raster = rasterize_atlas(atlas_uvs, np.array([Instance.OBJECT], dtype=np.uint8), 128)
    flow = FlowField(np.full((128, 128, 2), np.nan))
    visibility = VisibilityMask(np.zeros((128, 128), dtype=bool))

    with pytest.raises(MissingObjectTexture):
        assemble_unified_texture(solid(4, 4, 0), flow, visibility, None, layout, u_raster)

    texture = solid(8, 8, (10, 200, 30, 255))
    result = assemble_unified_texture(solid(4, 4, 0), flow, visibility, texture, layout, u_raster, dilation=0)
    np.testing.assert_array_equal(result.filled, u_raster.covered)
    assert (result.image[u_raster.covered] == (10, 200, 30, 255)).all()

    layout.object_uv_source = 'grid'
    with pytest.raises(MissingUVs):
        assemble_unified_texture(solid(4, 4, 0), flow, visibility, texture, layout, u_raster)


def test_target_flow_and_topology_map():
    target_screen = np.array([[1.0, 1.0, 1.0], [15.0, 1.0, 1.0], [1.0, 15.0, 1.0]])
    t_raster = rasterize(target_screen, [[0, 1, 2]], [Instance.HAND], (16, 16))
    atlas_uvs = np.array([[[10.0, 10.0], [40.0, 10.0], [10.0, 40.0]]])

    flow = flow_target_from_unified(t_raster, atlas_uvs)
    np.testing.assert_array_equal(flow.valid, t_raster.covered)
    rows, cols = np.nonzero(t_raster.covered)
    np.testing.assert_allclose(flow.vectors[rows, cols, 0], 10.0 + (cols + 0.5 - 1.0) * 30.0 / 14.0, atol=1e-4)

    topology = topology_map(t_raster, atlas_uvs)
    np.testing.assert_array_equal(topology.valid, t_raster.face >= 0)
    np.testing.assert_allclose(topology.values[t_raster.covered], np.tile([20.0, 20.0], (len(rows), 1)))

    with pytest.raises(MissingUVs):
        flow_target_from_unified(t_raster, np.zeros((0, 3, 2)))

    with pytest.raises(MissingUVs):
        topology_map(t_raster, None)


def test_split_topology_map():
    screen = np.array([[0, 0, 1], [8, 0, 1], [0, 8, 1], [8, 8, 1.0]])
    t_raster = rasterize(screen, [[0, 1, 2], [1, 3, 2]], [Instance.HAND, Instance.OBJECT], (8, 8))
    atlas_uvs = np.array([[[0, 0], [4, 0], [0, 4]], [[8, 0], [12, 0], [8, 4]]], dtype=np.float64)

    maps = split_topology_map(topology_map(t_raster, atlas_uvs), t_raster)

    np.testing.assert_array_equal(maps[Instance.HAND].valid, t_raster.instance == Instance.HAND)
    np.testing.assert_array_equal(maps[Instance.OBJECT].valid, t_raster.instance == Instance.OBJECT)
    assert (maps[Instance.HAND].valid | maps[Instance.OBJECT].valid).all()


def test_coarse_target_layout_mismatch():
    first = AtlasLayout(64)
    second = AtlasLayout(128)
    flow = FlowField(np.zeros((4, 4, 2)), layout=first)
    texture = UnifiedTexture(np.zeros((128, 128, 4), dtype=np.uint8), np.zeros((128, 128), dtype=bool), second)

    with pytest.raises(LayoutMismatch):
        synthesize_coarse_target(flow, texture)


def test_compose_identity_when_poses_match():
    source_screen, faces, atlas_uvs, s_raster, u_raster = two_face_setup()
    flow_us = flow_unified_from_source(u_raster, source_screen, faces)
    visibility = visibility_unified_from_source(u_raster, s_raster, flow_us)
    flow_tu = flow_target_from_unified(s_raster, atlas_uvs)

    composed = compose_flow_target_from_source(flow_tu, flow_us, visibility, u_raster)

    assert composed.shape == s_raster.shape
    assert not composed.valid[~s_raster.covered].any()
    assert composed.valid.sum() > 0.8 * s_raster.covered.sum()

    rows, cols = np.nonzero(composed.valid)
    centers = np.stack([cols + 0.5, rows + 0.5], axis=1)
    error = np.linalg.norm(composed.vectors[rows, cols] - centers, axis=1)
    # exact inside faces; partial same-face neighborhoods stay within one texel.
    assert np.median(error) < 1e-3
    assert error.max() <= 1.35


def test_compose_layout_mismatch():
    _, _, _, _, u_raster = two_face_setup()
    flow_tu = FlowField(np.zeros((4, 4, 2)), layout=AtlasLayout(64))
    flow_us = FlowField(np.zeros((64, 64, 2)), layout=AtlasLayout(128))
    visibility = VisibilityMask(np.ones((64, 64), dtype=bool))

    with pytest.raises(LayoutMismatch):
        compose_flow_target_from_source(flow_tu, flow_us, visibility, u_raster)

    with pytest.raises(LayoutMismatch):
        compose_flow_target_from_source(flow_tu, FlowField(np.zeros((8, 8, 2))), visibility, u_raster)


def test_raster_buffers_shape_checks():
    with pytest.raises(SizeMismatch):
        RasterBuffers(4, 3, face=np.zeros((4, 4)))
