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
Mesh and camera data model, Wavefront OBJ ingestion and screen projection.
"""

import os

import numpy as np

from topoflow.defines import (
    Instance, MIN_DEPTH, DEGENERATE_AREA_3D, ORTHONORMAL_TOL,
)
from topoflow.errors import (
    ParseError, EmptyMesh, NonOrthonormal, BehindCamera, TopologyMismatch,
    FileNotFound, InputError,
)
from topoflow.log import get_logger

logger = get_logger(__name__)


def _frozen(array, dtype):
    array = np.array(array, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


class Mesh(object):
    """Triangle mesh of one instance (hand or object)"""

    def __init__(self, vertices, faces, face_uvs=None, instance: Instance = Instance.OBJECT):
        """
        @type  vertices: Array (N_v, 3)
        @param vertices: Vertex positions in meters
        @type  faces:    Array (N_f, 3)
        @param faces:    0-based vertex index triples
        @type  face_uvs: Array (N_f, 3, 2)
        @param face_uvs: (Optional, def=None) Per-face texture coordinate triplets
        @type  instance: Instance
        @param instance: (Optional, def=OBJECT) Instance label

        @raise InputError: Index or shape invariants violated.
        """

        self.vertices = _frozen(vertices, np.float64).reshape(-1, 3)
        self.faces = _frozen(faces, np.int64).reshape(-1, 3)
        self.face_uvs = None if face_uvs is None else _frozen(face_uvs, np.float64).reshape(-1, 3, 2)
        self.instance = Instance(instance)

        if len(self.faces) and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise InputError('face index out of range for {} vertices'.format(len(self.vertices)))

        if self.face_uvs is not None and len(self.face_uvs) != len(self.faces):
            raise InputError('{} face uv triplets for {} faces'.format(len(self.face_uvs), len(self.faces)))

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_faces(self):
        return len(self.faces)

    def face_areas(self):
        """
        @rtype:  Array (N_f,)
        @return: Triangle areas in square meters.
        """

        tri = self.vertices[self.faces]
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1)

    def degenerate_faces(self):
        """
        Flag sliver faces. Degenerate faces are kept in the topology and
        skipped by the rasterizer.

        @rtype:  Array (N_f,) of bool
        @return: True where the 3D triangle area is at most 1e-12 m^2.
        """

        return self.face_areas() <= DEGENERATE_AREA_3D

    def with_vertices(self, vertices):
        """Same topology and uvs, new vertex positions."""
        return Mesh(vertices, self.faces, self.face_uvs, self.instance)

    def __repr__(self):
        return 'Mesh({}, {} vertices, {} faces, uvs={})'.format(
            self.instance.name.lower(), self.num_vertices, self.num_faces, self.face_uvs is not None)


class Camera(object):
    """Pinhole camera intrinsics and image size"""

    def __init__(self, fx: float, fy: float, cx: float, cy: float, width: int, height: int):
        if not (fx > 0 and fy > 0):
            raise InputError('focal lengths must be positive, got fx={} fy={}'.format(fx, fy))
        if int(width) < 1 or int(height) < 1:
            raise InputError('image size must be at least 1x1, got {}x{}'.format(width, height))

        self.fx = float(fx)
        self.fy = float(fy)
        self.cx = float(cx)
        self.cy = float(cy)
        self.width = int(width)
        self.height = int(height)

    @property
    def size(self):
        return self.width, self.height

    def __eq__(self, other):
        return isinstance(other, Camera) and (
            (self.fx, self.fy, self.cx, self.cy, self.width, self.height)
            == (other.fx, other.fy, other.cx, other.cy, other.width, other.height))

    def __repr__(self):
        return 'Camera(fx={}, fy={}, cx={}, cy={}, {}x{})'.format(
            self.fx, self.fy, self.cx, self.cy, self.width, self.height)


class Scene(object):
    """One frame: posed hand, rigidly placed object, camera and optional image"""

    def __init__(self, camera: Camera, hand: Mesh = None, obj: Mesh = None,
                 rotation=None, translation=None, image: str = None, object_texture: str = None):
        """
        @type  camera:         Camera
        @param camera:         Camera for this frame
        @type  hand:           Mesh
        @param hand:           (Optional) Hand mesh with posed vertices, camera frame
        @type  obj:            Mesh
        @param obj:            (Optional) Canonical object mesh
        @type  rotation:       Array (3, 3)
        @param rotation:       (Optional, def=I) Object rotation
        @type  translation:    Array (3,)
        @param translation:    (Optional, def=0) Object translation in meters
        @type  image:          String
        @param image:          (Optional) Path of the RGBA image of this frame
        @type  object_texture: String
        @param object_texture: (Optional) Path of the pre-stored object texture

        @raise NonOrthonormal: Rotation is not orthonormal within 1e-6.
        """

        self.camera = camera
        self.hand = hand
        self.object = obj
        self.rotation = _frozen(np.eye(3) if rotation is None else rotation, np.float64).reshape(3, 3)
        self.translation = _frozen(np.zeros(3) if translation is None else translation, np.float64).reshape(3)
        self.image = image
        self.object_texture = object_texture
        self._posed_object = None

        check_rotation(self.rotation)

    def posed_object(self):
        """
        @rtype:  Mesh
        @return: The object mesh in the camera frame, or None without an object.
        """

        if self.object is None:
            return None

        if self._posed_object is None:
            self._posed_object = apply_rigid_transform(self.object, self.rotation, self.translation)

        return self._posed_object

    def meshes(self):
        """Posed meshes in combined face order: hand first, then object."""
        return [mesh for mesh in (self.hand, self.posed_object()) if mesh is not None]


def check_rotation(rotation):
    """
    @raise NonOrthonormal: ||R R^T - I||_inf exceeds 1e-6.
    """

    rotation = np.asarray(rotation, dtype=np.float64)
    error = np.abs(rotation @ rotation.T - np.eye(3)).max()

    if not np.isfinite(error) or error > ORTHONORMAL_TOL:
        raise NonOrthonormal('||R R^T - I||_inf = {:.3g}'.format(error))


def load_obj(path, instance: Instance = Instance.OBJECT) -> Mesh:
    """
    Read a Wavefront OBJ file. Polygons are fan triangulated, texture
    coordinates become per-face uv triplets when every face references them.
    Normals, groups, materials and other records are ignored.

    @type  path:     String
    @param path:     Path of the .obj file
    @type  instance: Instance
    @param instance: (Optional, def=OBJECT) Instance label of the mesh

    @raise FileNotFound: The file does not exist.
    @raise ParseError:   A record is malformed.
    @raise EmptyMesh:    The file defines no faces.
    @rtype:  Mesh
    @return: Loaded mesh.
    """

    if not os.path.isfile(path):
        raise FileNotFound(path)

    vertices = []
    texcoords = []
    faces = []
    face_tex = []
    textured = None

    def resolve(token, count, line_no, what):
        # OBJ indices are 1-based, negative values count back from the end.
        try:
            index = int(token)
        except ValueError:
            raise ParseError(line_no, 'bad {} index {!r}'.format(what, token))

        if index > 0:
            index -= 1
        elif index < 0:
            index += count
        else:
            raise ParseError(line_no, '{} index 0 is not valid'.format(what))

        if not 0 <= index < count:
            raise ParseError(line_no, '{} index {} out of range'.format(what, token))

        return index

    with open(path, 'r') as obj_file:
        for line_no, line in enumerate(obj_file, start=1):
            tokens = line.split('#', 1)[0].split()

            if not tokens:
                continue

            kind = tokens[0]

            if kind == 'v':
                if len(tokens) < 4:
                    raise ParseError(line_no, 'vertex needs 3 coordinates')
                try:
                    vertices.append([float(value) for value in tokens[1:4]])
                except ValueError:
                    raise ParseError(line_no, 'non-numeric vertex coordinate')

            elif kind == 'vt':
                if len(tokens) < 3:
                    raise ParseError(line_no, 'texture coordinate needs u and v')
                try:
                    texcoords.append([float(value) for value in tokens[1:3]])
                except ValueError:
                    raise ParseError(line_no, 'non-numeric texture coordinate')

            elif kind == 'f':
                if len(tokens) < 4:
                    raise ParseError(line_no, 'face needs at least 3 vertices')

                polygon = []
                polygon_tex = []

                for token in tokens[1:]:
                    parts = token.split('/')
                    polygon.append(resolve(parts[0], len(vertices), line_no, 'vertex'))

                    if len(parts) > 1 and parts[1]:
                        polygon_tex.append(resolve(parts[1], len(texcoords), line_no, 'texture'))

                has_tex = len(polygon_tex) == len(polygon)

                if polygon_tex and not has_tex:
                    raise ParseError(line_no, 'texture indices on some corners only')

                if textured is None:
                    textured = has_tex
                elif textured != has_tex:
                    raise ParseError(line_no, 'mixed faces with and without texture coordinates')

                for i in range(2, len(polygon)):
                    faces.append((polygon[0], polygon[i - 1], polygon[i]))
                    if has_tex:
                        face_tex.append((polygon_tex[0], polygon_tex[i - 1], polygon_tex[i]))

    if not faces:
        raise EmptyMesh('{} defines no faces'.format(path))

    face_uvs = None
    if textured:
        face_uvs = np.asarray(texcoords, dtype=np.float64)[np.asarray(face_tex)]

    mesh = Mesh(vertices, faces, face_uvs, instance)
    logger.debug('loaded {} from {}'.format(mesh, path))

    return mesh


def write_obj(mesh: Mesh, path):
    """
    Write a mesh as Wavefront OBJ. Vertices are printed with 9 significant
    decimals; texture coordinates are written one per face corner.
    """

    with open(path, 'w') as obj_file:
        obj_file.write('# topoflow {} mesh\n'.format(mesh.instance.name.lower()))

        for x, y, z in mesh.vertices:
            obj_file.write('v {:.9f} {:.9f} {:.9f}\n'.format(x, y, z))

        if mesh.face_uvs is None:
            for a, b, c in mesh.faces:
                obj_file.write('f {} {} {}\n'.format(a + 1, b + 1, c + 1))
            return

        for u, v in mesh.face_uvs.reshape(-1, 2):
            obj_file.write('vt {:.9f} {:.9f}\n'.format(u, v))

        for index, (a, b, c) in enumerate(mesh.faces):
            t = 3 * index + 1
            obj_file.write('f {}/{} {}/{} {}/{}\n'.format(a + 1, t, b + 1, t + 1, c + 1, t + 2))


def apply_rigid_transform(mesh: Mesh, rotation, translation) -> Mesh:
    """
    v' = R v + t for every vertex. Topology and uvs are unchanged.

    @raise NonOrthonormal: R is not a rotation within 1e-6.
    """

    rotation = np.asarray(rotation, dtype=np.float64).reshape(3, 3)
    translation = np.asarray(translation, dtype=np.float64).reshape(3)
    check_rotation(rotation)

    return mesh.with_vertices(mesh.vertices @ rotation.T + translation)


def project(scene: Scene, mesh: Mesh):
    """
    Pinhole projection of camera-frame vertices.

    @type  scene: Scene
    @param scene: Scene supplying the camera
    @type  mesh:  Mesh
    @param mesh:  Mesh already expressed in the camera frame

    @raise BehindCamera: A vertex has z <= 1e-6 m.
    @rtype:  Array (N_v, 3)
    @return: Screen coordinates (x px, y px, z m).
    """

    camera = scene.camera
    vertices = mesh.vertices
    z = vertices[:, 2]

    behind = np.flatnonzero(~(z > MIN_DEPTH))
    if len(behind):
        raise BehindCamera(int(behind[0]), float(z[behind[0]]))

    screen = np.empty_like(vertices)
    screen[:, 0] = camera.fx * vertices[:, 0] / z + camera.cx
    screen[:, 1] = camera.fy * vertices[:, 1] / z + camera.cy
    screen[:, 2] = z

    return screen


def validate_topology(reference: Mesh, other: Mesh):
    """
    Hand frames of one sequence must share the face list exactly.

    @raise TopologyMismatch: Face lists differ.
    """

    if reference.faces.shape != other.faces.shape:
        raise TopologyMismatch('{} faces vs {} faces'.format(reference.num_faces, other.num_faces))

    if not np.array_equal(reference.faces, other.faces):
        first = int(np.flatnonzero((reference.faces != other.faces).any(axis=1))[0])
        raise TopologyMismatch('face lists differ, first at face {}'.format(first))
