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
Pipeline driver.

L{TopoFlow} holds one source/target scene pair and runs the full chain:
rasterization of the source, target and unified spaces, the unified flow,
visibility, unified texture assembly, the target flow, the coarse target,
the topology map, the composed source-to-target flow, the analytic masks,
the hand and background layers and the final fusion.
"""

import json
import os
import shutil
import tempfile
import time

import numpy as np

from topoflow import imageio, tflo
from topoflow.atlas import build_unified_atlas
from topoflow.buffers import LayerSet, instance_of_faces
from topoflow.compose import analytic_masks, fuse, inpaint_background, fill_hand_holes
from topoflow.defines import (
    __version__, Instance, KIND_IMAGE, KIND_MASK, KIND_FLOW, KIND_TOPOLOGY, KIND_DEPTH, KIND_FACE_MAP,
    KIND_MANIFEST,
)
from topoflow.errors import TFError, StageError, SchemaError, IoError
from topoflow.flow import (
    flow_unified_from_source, visibility_unified_from_source, assemble_unified_texture,
    flow_target_from_unified, synthesize_coarse_target, topology_map, split_topology_map,
    compose_flow_target_from_source, warp,
)
from topoflow.log import get_logger
from topoflow.mesh import project
from topoflow.raster import rasterize, rasterize_atlas
from topoflow.scene import RunOptions, parse_scene

logger = get_logger(__name__)

MANIFEST_NAME = 'manifest.json'

# stage groups in execution order; run(until=...) stops after a group.
STAGE_GROUPS = (
    ('raster', ('raster',)),
    ('atlas', ('flow_us', 'visibility', 'texture')),
    ('flow', ('flow_tu', 'coarse_target', 'topology', 'flow_ts', 'masks')),
    ('fuse', ('hand_layer', 'background', 'fusion')),
)


class RunManifest(object):
    """Record of one run: inputs, emitted artifacts, stage timings"""

    def __init__(self, config_path=None, output_dir=None):
        self.config_path = config_path
        self.output_dir = output_dir
        self.artifacts = {}   # file name -> kind
        self.timings = {}     # stage -> milliseconds
        self.version = __version__
        self.status = 'running'
        self.error = None
        self.failed_stage = None
        self.options = {}

    def add(self, name: str, kind: str):
        self.artifacts[name] = kind

    def fail(self, error: Exception):
        self.status = 'failed'
        self.error = str(error)
        self.failed_stage = getattr(error, 'stage', None)

    def to_dict(self):
        manifest = {
            'config': self.config_path,
            'output_dir': self.output_dir,
            'artifacts': dict(sorted(self.artifacts.items())),
            'timings_ms': self.timings,
            'version': 'topoflow {}'.format(self.version),
            'status': self.status,
            'options': self.options,
        }
        if self.error is not None:
            manifest['error'] = self.error
            manifest['stage'] = self.failed_stage
        return manifest

    def write(self, path):
        try:
            with open(path, 'w') as manifest_file:
                json.dump(self.to_dict(), manifest_file, indent=2, sort_keys=True)
        except OSError as err:
            raise IoError(path, err.strerror or str(err))

    @classmethod
    def read(cls, path):
        with open(path, 'r') as manifest_file:
            data = json.load(manifest_file)

        manifest = cls(data.get('config'), data.get('output_dir'))
        manifest.artifacts = data.get('artifacts', {})
        manifest.timings = data.get('timings_ms', {})
        manifest.status = data.get('status')
        manifest.error = data.get('error')
        manifest.failed_stage = data.get('stage')
        manifest.options = data.get('options', {})
        return manifest


class _ViewGeometry(object):
    # combined hand + object geometry of one view.

    def __init__(self, scene):
        meshes = scene.meshes()
        screens = [project(scene, mesh) for mesh in meshes]

        offsets = np.cumsum([0] + [mesh.num_vertices for mesh in meshes])
        self.screen = np.concatenate(screens, axis=0)
        self.faces = np.concatenate([mesh.faces + offset for mesh, offset in zip(meshes, offsets)], axis=0)
        self.skip = np.concatenate([mesh.degenerate_faces() for mesh in meshes])
        self.instances = instance_of_faces([(mesh.instance, mesh.num_faces) for mesh in meshes])


class TopoFlow(object):
    """
    Occlusion-aware topology modeling for one source/target pair.

    Typical use::

        tf = TopoFlow()
        tf.load('scene.json').run()
        tf.write_artifacts('out/')
    """

    def __init__(self, options: RunOptions = None, object_texture: str = None):
        """
        @type  options:        RunOptions
        @param options:        (Optional, def=defaults) Run options
        @type  object_texture: String
        @param object_texture: (Optional) Texture replacing the configured object texture
        """

        self.options = options or RunOptions()
        self.object_texture_override = object_texture
        self.config_path = None
        self.callbacks = {}    # stage name -> function called with self once the stage is done
        self.timings = {}      # stage name -> milliseconds
        self.completed = []    # stage names, in execution order

        self.source = None     # source Scene
        self.target = None     # target Scene
        self.source_image = None  # RGBA source frame
        self._source_geometry = None

        # stage products.
        self.atlas_uvs = None  # P^u, atlas pixel coordinates per combined face
        self.layout = None     # AtlasLayout of the unified space
        self.s_raster = None
        self.t_raster = None
        self.u_raster = None
        self.flow_us = None    # T_{u<-s}
        self.visibility = None
        self.texture = None    # UnifiedTexture
        self.flow_tu = None    # T_{t<-u}
        self.coarse_target = None
        self.topology = None   # Y_t
        self.flow_ts = None    # T_{t<-s}
        self.mask_hand = None
        self.mask_foreground = None
        self.hand_layer = None
        self.background = None
        self.final = None

        # control debug/error logging.
        self._log = lambda msg: logger.debug(msg)
        self._err = lambda msg: logger.error(msg)

    def set_callback(self, stage: str, callback_func):
        """
        Call callback_func(topoflow) after the named stage completes.

        @type  stage:         String
        @param stage:         Stage name, see STAGE_GROUPS
        @type  callback_func: Function
        @param callback_func: Function to call
        """

        self.callbacks[stage] = callback_func
        return self

    def load(self, config_path):
        """
        Parse a scene configuration. Its output section replaces the options
        given to the constructor; apply command line flags afterwards with
        L{RunOptions.override}.

        @raise SchemaError, FileNotFound, TopologyMismatch: Invalid configuration.
        """

        source, target, options = parse_scene(config_path)
        self.config_path = config_path
        self.options = options

        return self.set_scenes(source, target)

    def set_scenes(self, source, target):
        if source.image is None:
            raise SchemaError('source.image')

        self.source = source
        self.target = target
        self.source_image = imageio.read_image(source.image)

        height, width = self.source_image.shape[:2]
        if (width, height) != source.camera.size:
            raise SchemaError('source.image', 'image is {}x{}, camera is {}x{}'.format(
                width, height, source.camera.width, source.camera.height))

        self._log('scenes set: source {}x{}, target {}x{}'.format(
            width, height, target.camera.width, target.camera.height))

        return self

    def object_texture(self):
        """
        @rtype:  Array (h, w, 4) uint8
        @return: The pre-stored object texture, or None.
        """

        path = self.object_texture_override or self.target.object_texture or self.source.object_texture
        return imageio.read_image(path) if path else None

    ####################################################################################################################
    # stages.

    def _stage(self, name, func):
        start = time.perf_counter()

        try:
            func()
        except Exception as err:
            self._err('stage {} failed: {}'.format(name, err))
            raise StageError(name, err)

        self.timings[name] = round((time.perf_counter() - start) * 1000.0, 3)
        self.completed.append(name)
        logger.info('{} done in {:.1f} ms'.format(name, self.timings[name]))

        if name in self.callbacks:
            self.callbacks[name](self)

    def stage_raster(self):
        threads = int(self.options.threads)
        source = _ViewGeometry(self.source)
        target = _ViewGeometry(self.target)

        self.s_raster = rasterize(source.screen, source.faces, source.instances, self.source.camera.size,
                                  skip=source.skip, threads=threads)
        self.t_raster = rasterize(target.screen, target.faces, target.instances, self.target.camera.size,
                                  skip=target.skip, threads=threads)

        self.atlas_uvs, self.layout = build_unified_atlas(self.source.hand, self.source.object,
                                                          int(self.options.atlas_size), float(self.options.margin))
        self.u_raster = rasterize_atlas(self.atlas_uvs, source.instances, int(self.options.atlas_size),
                                        threads=threads)
        self._source_geometry = source

        self._log('coverage: source {:.3f}, target {:.3f}, atlas {:.3f}'.format(
            self.s_raster.coverage(), self.t_raster.coverage(), self.u_raster.coverage()))

    def stage_flow_us(self):
        self.flow_us = flow_unified_from_source(self.u_raster, self._source_geometry.screen,
                                                self._source_geometry.faces, self.layout)

    def stage_visibility(self):
        self.visibility = visibility_unified_from_source(self.u_raster, self.s_raster, self.flow_us)
        self._log('visible texels: {:.3f}'.format(self.visibility.fraction(within=self.u_raster.covered)))

    def stage_texture(self):
        self.texture = assemble_unified_texture(self.source_image, self.flow_us, self.visibility,
                                                self.object_texture(), self.layout, self.u_raster,
                                                int(self.options.dilation))

    def stage_flow_tu(self):
        self.flow_tu = flow_target_from_unified(self.t_raster, self.atlas_uvs, self.layout)

    def stage_coarse_target(self):
        self.coarse_target = synthesize_coarse_target(self.flow_tu, self.texture)

    def stage_topology(self):
        self.topology = topology_map(self.t_raster, self.atlas_uvs)

    def stage_flow_ts(self):
        self.flow_ts = compose_flow_target_from_source(self.flow_tu, self.flow_us, self.visibility, self.u_raster)

    def stage_masks(self):
        self.mask_hand, self.mask_foreground = analytic_masks(self.t_raster)

    def stage_hand_layer(self):
        warped = warp(self.flow_ts, self.source_image)

        if self.mask_hand.any():
            self.hand_layer = fill_hand_holes(warped, self.t_raster, self.flow_ts.valid)
        else:
            self.hand_layer = warped

    def stage_background(self):
        # source frame with the source hand-object foreground removed.
        if self.source.camera.size != self.target.camera.size:
            raise SchemaError('target.camera', 'background reuse needs equal source and target image sizes')

        self.background = inpaint_background(self.source_image, self.s_raster.covered)

    def stage_fusion(self):
        layers = LayerSet(self.background, self.coarse_target, self.hand_layer, self.mask_hand, self.mask_foreground)
        self.final = fuse(layers)

    def run(self, until: str = None):
        """
        Run the stage groups in order.

        @type  until: String
        @param until: (Optional, def=all) Last stage group to run: raster, atlas, flow or fuse

        @raise StageError: A stage failed; the wrapped error is in .cause.
        @rtype:  TopoFlow
        @return: Self
        """

        if self.source is None:
            raise TFError('no scenes loaded')

        groups = [group for group, _ in STAGE_GROUPS]
        if until is not None and until not in groups:
            raise TFError('unknown stage group {!r}'.format(until))

        for group, stages in STAGE_GROUPS:
            if group == 'fuse' and self.options.skip_fusion:
                self._log('fusion skipped')
                break

            for name in stages:
                if name in self.completed:
                    continue
                self._stage(name, getattr(self, 'stage_' + name))

            if group == until:
                break

        return self

    ####################################################################################################################
    # artifacts.

    def artifacts(self):
        """
        @rtype:  List
        @return: (file name, kind, writer) for every product computed so far.
        """

        items = []

        def add(name, kind, value, writer):
            if value is not None:
                items.append((name, kind, lambda path: writer(path, value)))

        add('coarse_target.png', KIND_IMAGE, self.coarse_target, imageio.write_image)
        add('final.png', KIND_IMAGE, self.final, imageio.write_image)
        add('flow_us.tflo', KIND_FLOW, self.flow_us, lambda path, v: tflo.write_tflo(v, path))
        add('flow_tu.tflo', KIND_FLOW, self.flow_tu, lambda path, v: tflo.write_tflo(v, path))
        add('flow_ts.tflo', KIND_FLOW, self.flow_ts, lambda path, v: tflo.write_tflo(v, path))
        add('visibility.png', KIND_MASK, None if self.visibility is None else self.visibility.visible,
            imageio.write_mask)
        add('topology.tmap', KIND_TOPOLOGY, self.topology, lambda path, v: tflo.write_tflo(v, path))
        add('mask_h.png', KIND_MASK, self.mask_hand, imageio.write_mask)
        add('mask_f.png', KIND_MASK, self.mask_foreground, imageio.write_mask)
        add('atlas.png', KIND_IMAGE, None if self.texture is None else self.texture.image, imageio.write_image)

        raster_dump = self.options.dump_intermediate or self.completed == ['raster']
        if raster_dump:
            for view, raster in (('s', self.s_raster), ('t', self.t_raster), ('u', self.u_raster)):
                if raster is None:
                    continue
                add('face_{}.png'.format(view), KIND_FACE_MAP, raster.face, imageio.write_face_map)
                if view != 'u':
                    add('depth_{}.tflo'.format(view), KIND_DEPTH, raster.depth,
                        lambda path, v: tflo.write_tflo(v, path))

        if self.options.dump_intermediate:
            add('hand_layer.png', KIND_IMAGE, self.hand_layer, imageio.write_image)
            add('background.png', KIND_IMAGE, self.background, imageio.write_image)
            if self.topology is not None:
                maps = split_topology_map(self.topology, self.t_raster)
                add('topology_hand.tmap', KIND_TOPOLOGY, maps[Instance.HAND], lambda path, v: tflo.write_tflo(v, path))
                add('topology_object.tmap', KIND_TOPOLOGY, maps[Instance.OBJECT],
                    lambda path, v: tflo.write_tflo(v, path))

        return items

    def write_artifacts(self, output_dir, manifest: RunManifest = None):
        """
        Write every computed product, then the manifest. Files are staged in
        a sibling directory and moved into place only once all of them are
        written.

        @rtype:  RunManifest
        @return: The manifest written last.
        """

        manifest = manifest or RunManifest(self.config_path, output_dir)
        manifest.output_dir = output_dir
        manifest.options = self.options.to_dict()
        manifest.timings.update(self.timings)

        os.makedirs(output_dir, exist_ok=True)
        staging = tempfile.mkdtemp(prefix='.topoflow-', dir=os.path.dirname(os.path.abspath(output_dir)))

        try:
            for name, kind, writer in self.artifacts():
                writer(os.path.join(staging, name))
                manifest.add(name, kind)

            for name in manifest.artifacts:
                os.replace(os.path.join(staging, name), os.path.join(output_dir, name))
        finally:
            shutil.rmtree(staging, ignore_errors=True)

        manifest.status = 'ok'
        manifest.add(MANIFEST_NAME, KIND_MANIFEST)
        manifest.write(os.path.join(output_dir, MANIFEST_NAME))
        self._log('wrote {} artifacts to {}'.format(len(manifest.artifacts), output_dir))

        return manifest


def generate(config_path, output_dir, object_texture: str = None, until: str = None, **flags):
    """
    Load, run and write in one call. On failure only a failure manifest is
    left in output_dir and the error is re-raised.

    @type  flags: Keyword arguments
    @param flags: RunOptions overrides, None leaves the configured value

    @rtype:  RunManifest
    @return: Manifest of the run.
    """

    manifest = RunManifest(config_path, output_dir)
    driver = TopoFlow(object_texture=object_texture)

    try:
        driver.load(config_path)
        driver.options.override(**flags)
        driver.run(until)
        return driver.write_artifacts(output_dir, manifest)
    except Exception as err:
        manifest.artifacts = {}
        manifest.timings.update(driver.timings)
        manifest.options = driver.options.to_dict()
        manifest.fail(err)
        os.makedirs(output_dir, exist_ok=True)
        manifest.write(os.path.join(output_dir, MANIFEST_NAME))
        raise
