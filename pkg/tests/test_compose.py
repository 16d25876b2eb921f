import numpy as np
import pytest

from topoflow.buffers import LayerSet, RasterBuffers
from topoflow.compose import analytic_masks, fuse, inpaint_background, fill_hand_holes
from topoflow.defines import Instance
from topoflow.errors import AllForeground, NoVisibleHand, SizeMismatch, InputError
from topoflow.raster import rasterize


def scalar_fuse(hand, obj, background, m_h, m_f):
    out = np.empty_like(hand)
    height, width, channels = hand.shape
    for y in range(height):
        for x in range(width):
            h = 1 if m_h[y, x] else 0
            f = 1 if m_f[y, x] else 0
            for c in range(channels):
                value = (int(hand[y, x, c]) * h + int(obj[y, x, c]) * (1 - h)) * f + int(background[y, x, c]) * (1 - f)
                out[y, x, c] = value
    return out


def test_fuse_matches_scalar_evaluation():
    rng = np.random.default_rng(5)

    for _ in range(1000):
        hand, obj, background = (rng.integers(0, 256, (8, 8, 4), dtype=np.uint8) for _ in range(3))
        m_f = rng.random((8, 8)) < 0.6
        m_h = m_f & (rng.random((8, 8)) < 0.5)

        fused = fuse(LayerSet(background, obj, hand, m_h, m_f))

        assert fused.dtype == np.uint8
        np.testing.assert_array_equal(fused, scalar_fuse(hand, obj, background, m_h, m_f))


def test_fuse_float_layers():
    hand = np.full((2, 2, 3), 0.25)
    obj = np.full((2, 2, 3), 0.5)
    background = np.full((2, 2, 3), 0.75)
    m_f = np.array([[True, True], [False, False]])
    m_h = np.array([[True, False], [False, False]])

    fused = fuse(LayerSet(background, obj, hand, m_h, m_f))

    np.testing.assert_array_equal(fused[..., 0], [[0.25, 0.5], [0.75, 0.75]])


def test_fuse_validation():
    layer = np.zeros((4, 4, 4), dtype=np.uint8)
    m_f = np.zeros((4, 4), dtype=bool)
    m_h = np.zeros((4, 4), dtype=bool)
    m_h[0, 0] = True

    with pytest.raises(InputError):
        fuse(LayerSet(layer, layer, layer, m_h, m_f))

    with pytest.raises(SizeMismatch):
        fuse(LayerSet(np.zeros((4, 5, 4), dtype=np.uint8), layer, layer, m_f, m_f))


def test_analytic_masks():
    screen = np.array([[0, 0, 1], [6, 0, 1], [0, 6, 1], [2, 2, 0.5], [8, 2, 0.5], [2, 8, 0.5]], dtype=np.float64)
    t_raster = rasterize(screen, [[0, 1, 2], [3, 4, 5]], [Instance.OBJECT, Instance.HAND], (8, 8))

    mask_hand, mask_foreground = analytic_masks(t_raster)

    np.testing.assert_array_equal(mask_foreground, t_raster.face >= 0)
    np.testing.assert_array_equal(mask_hand, t_raster.face == 1)
    assert not (mask_hand & ~mask_foreground).any()
    # the nearer hand triangle hides part of the object.
    assert (mask_foreground & ~mask_hand).any()


def test_inpaint_single_hole_takes_neighbor_mean():
    image = np.zeros((3, 3, 3), dtype=np.uint8)
    image[..., 0] = [[10, 20, 30], [40, 255, 60], [70, 80, 90]]
    mask = np.zeros((3, 3), dtype=bool)
    mask[1, 1] = True

    out = inpaint_background(image, mask)

    assert out[1, 1, 0] == 50
    np.testing.assert_array_equal(out[~mask], image[~mask])


def test_inpaint_fills_everything_and_is_deterministic():
    rng = np.random.default_rng(9)
    image = rng.integers(0, 256, (20, 24, 4), dtype=np.uint8)
    mask = np.zeros((20, 24), dtype=bool)
    mask[3:15, 5:20] = True

    first = inpaint_background(image, mask)
    second = inpaint_background(image, mask)

    np.testing.assert_array_equal(first, second)
    np.testing.assert_array_equal(first[~mask], image[~mask])
    # values stay inside the range of the known pixels.
    assert first[mask].min() >= image[~mask].min()
    assert first[mask].max() <= image[~mask].max()


def test_inpaint_linear_gradient_hole():
    xs = np.arange(64, dtype=np.float64)
    truth = np.broadcast_to(20.0 + 3.0 * xs, (32, 64))
    image = np.zeros((32, 64, 3), dtype=np.uint8)
    image[..., 0] = np.rint(truth)
    image[..., 1] = 90
    mask = np.zeros((32, 64), dtype=bool)
    mask[12:17, 30:35] = True
    image[mask] = 255

    out = inpaint_background(image, mask)

    assert np.abs(out[..., 0][mask].astype(np.float64) - truth[mask]).max() <= 10.0
    assert (out[..., 1][mask] == 90).all()


def test_inpaint_constant_background_is_exact():
    image = np.full((10, 10, 4), 77, dtype=np.uint8)
    mask = np.zeros((10, 10), dtype=bool)
    mask[2:9, 1:7] = True
    image[mask] = 0

    out = inpaint_background(image, mask)

    assert (out == 77).all()


def test_inpaint_edge_cases():
    image = np.zeros((4, 4, 3), dtype=np.uint8)

    unchanged = inpaint_background(image, np.zeros((4, 4), dtype=bool))
    np.testing.assert_array_equal(unchanged, image)
    assert unchanged is not image

    with pytest.raises(AllForeground):
        inpaint_background(image, np.ones((4, 4), dtype=bool))

    with pytest.raises(SizeMismatch):
        inpaint_background(image, np.zeros((3, 4), dtype=bool))


def hand_raster():
    # two hand faces side by side on a 4x2 frame.
    face = np.array([[0, 0, 1, 1], [0, 0, 1, 1]], dtype=np.int32)
    instance = np.full((2, 4), Instance.HAND, dtype=np.uint8)
    return RasterBuffers(4, 2, face=face, instance=instance)


def test_fill_hand_holes_per_face_mean():
    raster = hand_raster()
    layer = np.zeros((2, 4, 4), dtype=np.uint8)
    layer[0, 0] = (10, 20, 30, 255)
    layer[1, 0] = (30, 40, 50, 255)
    layer[0, 2] = (200, 200, 200, 255)
    valid = np.zeros((2, 4), dtype=bool)
    valid[0, 0] = valid[1, 0] = valid[0, 2] = True

    out = fill_hand_holes(layer, raster, valid)

    np.testing.assert_array_equal(out[0, 1], (20, 30, 40, 255))
    np.testing.assert_array_equal(out[1, 1], (20, 30, 40, 255))
    np.testing.assert_array_equal(out[1, 3], (200, 200, 200, 255))
    np.testing.assert_array_equal(out[valid], layer[valid])


def test_fill_hand_holes_global_fallback():
    raster = hand_raster()
    layer = np.zeros((2, 4, 4), dtype=np.uint8)
    layer[0, 0] = (100, 100, 100, 255)
    layer[1, 0] = (50, 50, 50, 255)
    valid = np.zeros((2, 4), dtype=bool)
    valid[0, 0] = valid[1, 0] = True

    out = fill_hand_holes(layer, raster, valid)

    # face 1 has no valid pixel and takes the mean of all valid hand pixels.
    np.testing.assert_array_equal(out[0, 3], (75, 75, 75, 255))


def test_fill_hand_holes_without_visible_hand():
    with pytest.raises(NoVisibleHand):
        fill_hand_holes(np.zeros((2, 4, 4), dtype=np.uint8), hand_raster(), np.zeros((2, 4), dtype=bool))
