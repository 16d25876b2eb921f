"""
Shared synthetic scenes and independent oracles.

Geometry is in meters: a textured cube object and a two-box "hand" (palm and
one finger hinged at the top of the palm) seen by a 96x96 pinhole camera.
"""

import json

import numpy as np
import pytest

from topoflow.defines import Instance
from topoflow.imageio import write_image
from topoflow.mesh import Camera, Mesh, Scene, project, write_obj
from topoflow.raster import rasterize

# hand colour per meter of camera-frame position, around a base colour at the palm center.
HAND_BASE_COLOR = np.array([120.0, 110.0, 100.0])
HAND_COLOR_SLOPE = np.array([2000.0, 1200.0, 3000.0])
HAND_ORIGIN = np.array([-0.06, -0.02, 0.5])

# quads of a box over its 8 corners, corner i = (x bit 0, y bit 1, z bit 2).
BOX_QUADS = [(0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1), (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3)]


def box_vertices(center, size):
    center = np.asarray(center, dtype=np.float64)
    half = np.asarray(size, dtype=np.float64) / 2.0
    corners = np.array([[(i >> 0) & 1, (i >> 1) & 1, (i >> 2) & 1] for i in range(8)], dtype=np.float64)
    return center + (corners * 2.0 - 1.0) * half


def box_faces(offset=0):
    faces = []
    for a, b, c, d in BOX_QUADS:
        faces.append((a + offset, b + offset, c + offset))
        faces.append((a + offset, c + offset, d + offset))
    return np.array(faces, dtype=np.int64)


def cube_face_uvs(inset=0.02):
    """Each quad of the cube gets its own cell of a 3x2 grid in texture space."""

    uvs = []
    for k in range(6):
        u0 = (k % 3) / 3.0 + inset
        v0 = (k // 3) / 2.0 + inset
        u1 = (k % 3 + 1) / 3.0 - inset
        v1 = (k // 3 + 1) / 2.0 - inset
        quad = [(u0, v0), (u1, v0), (u1, v1), (u0, v1)]
        uvs.append([quad[0], quad[1], quad[2]])
        uvs.append([quad[0], quad[2], quad[3]])
    return np.array(uvs, dtype=np.float64)


def make_cube(size=0.08):
    return Mesh(box_vertices((0.0, 0.0, 0.0), (size, size, size)), box_faces(), cube_face_uvs(), Instance.OBJECT)


def make_hand(finger_angle=0.0, center=(-0.06, 0.0, 0.5)):
    """Palm plus one finger; the finger rotates about the x axis at the top edge of the palm."""

    center = np.asarray(center, dtype=np.float64)
    palm = box_vertices(center, (0.05, 0.05, 0.02))
    finger = box_vertices(center + (0.0, -0.045, 0.0), (0.015, 0.04, 0.015))

    hinge = center + (0.0, -0.025, 0.0)
    c, s = np.cos(finger_angle), np.sin(finger_angle)
    rot = np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    finger = (finger - hinge) @ rot.T + hinge

    vertices = np.concatenate([palm, finger], axis=0)
    faces = np.concatenate([box_faces(0), box_faces(8)], axis=0)
    return Mesh(vertices, faces, None, Instance.HAND)


def rotation_y(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_x(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def make_camera(size=96, focal=200.0):
    return Camera(focal, focal, size / 2.0, size / 2.0, size, size)


def make_texture(size=64):
    """Linear RGB ramp, so bilinear resampling reproduces it."""

    xs, ys = np.meshgrid(np.arange(size, dtype=np.float64), np.arange(size, dtype=np.float64))
    texture = np.empty((size, size, 4), dtype=np.uint8)
    texture[..., 0] = np.rint(40 + 180 * xs / (size - 1))
    texture[..., 1] = np.rint(40 + 150 * ys / (size - 1))
    texture[..., 2] = 120
    texture[..., 3] = 255
    return texture


def hand_vertex_colors(vertices):
    """Linear RGB gradient over camera-frame vertex positions."""
    return HAND_BASE_COLOR + (np.asarray(vertices, dtype=np.float64) - HAND_ORIGIN) * HAND_COLOR_SLOPE


def make_background(width, height):
    xs, ys = np.meshgrid(np.arange(width), np.arange(height))
    image = np.empty((height, width, 4), dtype=np.uint8)
    image[..., 0] = (30 + xs) % 256
    image[..., 1] = (60 + 2 * ys) % 256
    image[..., 2] = 90
    image[..., 3] = 255
    return image


def combined_geometry(scene):
    meshes = scene.meshes()
    screens = [project(scene, mesh) for mesh in meshes]
    offsets = np.cumsum([0] + [mesh.num_vertices for mesh in meshes])
    screen = np.concatenate(screens, axis=0)
    faces = np.concatenate([mesh.faces + off for mesh, off in zip(meshes, offsets)], axis=0)
    instances = np.concatenate([np.full(mesh.num_faces, int(mesh.instance), dtype=np.uint8) for mesh in meshes])
    uvs = [mesh.face_uvs if mesh.face_uvs is not None else np.full((mesh.num_faces, 3, 2), np.nan)
           for mesh in meshes]
    colors = [hand_vertex_colors(mesh.vertices) if mesh.instance == Instance.HAND else np.zeros((mesh.num_vertices, 3))
              for mesh in meshes]
    return screen, faces, instances, np.concatenate(uvs, axis=0), np.concatenate(colors, axis=0)


def sample_bilinear(image, x, y):
    # half-pixel centers, clamped at the border.
    height, width = image.shape[:2]
    x = np.clip(x - 0.5, 0, width - 1)
    y = np.clip(y - 0.5, 0, height - 1)
    x0 = np.floor(x).astype(int)
    y0 = np.floor(y).astype(int)
    x1 = np.minimum(x0 + 1, width - 1)
    y1 = np.minimum(y0 + 1, height - 1)
    fx = (x - x0)[:, None]
    fy = (y - y0)[:, None]
    img = image.astype(np.float64)
    return (img[y0, x0] * (1 - fx) * (1 - fy) + img[y0, x1] * fx * (1 - fy)
            + img[y1, x0] * (1 - fx) * fy + img[y1, x1] * fx * fy)


def render_scene(scene, texture, background=None):
    """
    Direct re-render: hand pixels interpolate the hand vertex colours, object
    pixels sample the texture at their interpolated texture coordinates, the
    rest is background.
    """

    width, height = scene.camera.size
    screen, faces, instances, uvs, colors = combined_geometry(scene)
    raster = rasterize(screen, faces, instances, (width, height))

    image = make_background(width, height) if background is None else background.copy()
    hand = raster.instance == Instance.HAND
    if hand.any():
        shade = np.einsum('ki,kij->kj', raster.bary[hand], colors[faces[raster.face[hand]]])
        image[hand, :3] = np.clip(np.rint(shade), 0, 255).astype(np.uint8)
        image[hand, 3] = 255

    obj = raster.instance == Instance.OBJECT
    if obj.any():
        tri = uvs[raster.face[obj]]
        uv = np.einsum('ki,kij->kj', raster.bary[obj], tri)
        th, tw = texture.shape[:2]
        texels = sample_bilinear(texture, uv[:, 0] * tw, (1.0 - uv[:, 1]) * th)
        image[obj] = np.clip(np.rint(texels), 0, 255).astype(np.uint8)

    return image, raster


def brute_force_raster(screen, faces, size):
    """
    All-triangles-per-pixel reference: every face is tested against every
    pixel center of the frame, the nearest (then lowest index) wins.
    """

    width, height = size
    px, py = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
    best_face = np.full((height, width), -1, dtype=np.int64)
    best_depth = np.full((height, width), np.inf)

    def edge(ax, ay, bx, by):
        return (bx - ax) * (py - ay) - (by - ay) * (px - ax)

    def owns(value, dx, dy):
        top_left = (dy == 0 and dx > 0) or dy < 0
        return value >= 0 if top_left else value > 0

    for index, (ia, ib, ic) in enumerate(faces):
        (ax, ay, za), (bx, by, zb), (cx, cy, zc) = screen[[ia, ib, ic]].tolist()
        area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if abs(area) <= 1e-12:
            continue
        if area < 0:
            bx, by, zb, cx, cy, zc = cx, cy, zc, bx, by, zb
            area = -area

        e0 = edge(bx, by, cx, cy)
        e1 = edge(cx, cy, ax, ay)
        e2 = edge(ax, ay, bx, by)
        inside = owns(e0, cx - bx, cy - by) & owns(e1, ax - cx, ay - cy) & owns(e2, bx - ax, by - ay)
        depth = (e0 / area) * za + (e1 / area) * zb + (e2 / area) * zc

        wins = inside & (depth < best_depth)
        best_face[wins] = index
        best_depth[wins] = depth[wins]

    return best_face


class SceneFiles(object):
    """Paths of a scene written to disk"""

    def __init__(self, root, config, source, target, texture, source_image):
        self.root = root
        self.config = config
        self.source = source
        self.target = target
        self.texture = texture
        self.source_image = source_image


def write_scene(root, target_finger=0.0, target_rotation=None, target_translation=(0.03, 0.0, 0.5),
                source_rotation=None, source_translation=(0.03, 0.0, 0.5), output=None, with_hand=True):
    """Write OBJs, texture, rendered source image and config under root."""

    camera = make_camera()
    cube = make_cube()
    texture = make_texture()
    hand_s = make_hand(0.0)
    hand_t = make_hand(target_finger)
    source_rotation = np.eye(3) if source_rotation is None else np.asarray(source_rotation)
    target_rotation = np.eye(3) if target_rotation is None else np.asarray(target_rotation)

    source = Scene(camera, hand_s if with_hand else None, cube, source_rotation, source_translation)
    target = Scene(camera, hand_t if with_hand else None, cube, target_rotation, target_translation)
    source_image, _ = render_scene(source, texture)

    write_obj(cube, str(root / 'cube.obj'))
    write_obj(hand_s, str(root / 'hand_s.obj'))
    write_obj(hand_t, str(root / 'hand_t.obj'))
    write_image(str(root / 'cube.png'), texture)
    write_image(str(root / 'source.png'), source_image)

    config = {
        'camera': {'fx': camera.fx, 'fy': camera.fy, 'cx': camera.cx, 'cy': camera.cy,
                   'width': camera.width, 'height': camera.height},
        'source': {'object_obj': 'cube.obj', 'object_texture': 'cube.png', 'image': 'source.png',
                   'object_rotation': source_rotation.reshape(-1).tolist(),
                   'object_translation': list(source_translation)},
        'target': {'object_rotation': target_rotation.reshape(-1).tolist(),
                   'object_translation': list(target_translation)},
        'output': output or {},
    }
    if with_hand:
        config['source']['hand_obj'] = 'hand_s.obj'
        config['target']['hand_obj'] = 'hand_t.obj'

    path = root / 'scene.json'
    path.write_text(json.dumps(config, indent=2))

    return SceneFiles(root, str(path), source, target, texture, source_image)


@pytest.fixture
def camera():
    return make_camera()


@pytest.fixture
def cube():
    return make_cube()


@pytest.fixture
def texture():
    return make_texture()


@pytest.fixture
def same_pose_scene(tmp_path):
    return write_scene(tmp_path, output={'atlas_size': 1024})


@pytest.fixture
def novel_pose_scene(tmp_path):
    return write_scene(tmp_path, target_finger=0.5, target_rotation=rotation_y(0.35) @ rotation_x(0.2),
                       target_translation=(0.035, 0.005, 0.52), output={'atlas_size': 1024})
