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
Scene configuration parsing.

A configuration is one JSON document::

    {
      "camera": {"fx": ..., "fy": ..., "cx": ..., "cy": ..., "width": ..., "height": ...},
      "source": {"hand_obj": "hand_s.obj", "object_obj": "cube.obj",
                 "object_texture": "cube.png", "object_rotation": [9 floats],
                 "object_translation": [3 floats], "image": "source.png"},
      "target": {"hand_obj": "hand_t.obj", "object_rotation": [...], "object_translation": [...]},
      "output": {"atlas_size": 1024, "margin": 1.0, "dilation": 2, "threads": 1,
                 "skip_fusion": false, "dump_intermediate": false}
    }

The top-level camera supplies defaults for each scene's own camera. The
target inherits the source's object mesh and texture unless it names its
own. Relative paths resolve against the configuration file's directory.
"""

import json
import numbers
import os

from topoflow.defines import Instance, DEFAULT_ATLAS_SIZE, DEFAULT_MARGIN, DEFAULT_DILATION
from topoflow.errors import SchemaError, FileNotFound, InputError, TopologyMismatch
from topoflow.log import get_logger
from topoflow.mesh import Camera, Scene, load_obj, validate_topology

logger = get_logger(__name__)

CAMERA_FIELDS = ('fx', 'fy', 'cx', 'cy', 'width', 'height')


class RunOptions(object):
    """Output options of a generate run"""

    def __init__(self, atlas_size: int = DEFAULT_ATLAS_SIZE, margin: float = DEFAULT_MARGIN,
                 dilation: int = DEFAULT_DILATION, threads: int = 1, skip_fusion: bool = False,
                 dump_intermediate: bool = False):
        self.atlas_size = atlas_size
        self.margin = margin
        self.dilation = dilation
        self.threads = threads
        self.skip_fusion = skip_fusion
        self.dump_intermediate = dump_intermediate

    def override(self, **flags):
        """
        Apply command line flags; None values leave the configured value alone.

        @rtype:  RunOptions
        @return: Self
        """

        for name, value in flags.items():
            if not hasattr(self, name):
                raise InputError('unknown run option {!r}'.format(name))
            if value is not None:
                setattr(self, name, value)

        self.validate()
        return self

    def validate(self):
        if int(self.atlas_size) < 2:
            raise SchemaError('output.atlas_size', 'must be at least 2')
        if float(self.margin) < 0:
            raise SchemaError('output.margin', 'must be non-negative')
        if int(self.dilation) < 0:
            raise SchemaError('output.dilation', 'must be non-negative')
        if int(self.threads) < 1:
            raise SchemaError('output.threads', 'must be at least 1')
        return self

    def to_dict(self):
        return {
            'atlas_size': self.atlas_size,
            'margin': self.margin,
            'dilation': self.dilation,
            'threads': self.threads,
            'skip_fusion': self.skip_fusion,
            'dump_intermediate': self.dump_intermediate,
        }


def _is_number(value):
    return isinstance(value, numbers.Real) and not isinstance(value, bool)


def _numbers(section, key, count, where):
    value = section.get(key)
    if not isinstance(value, list) or len(value) != count or not all(_is_number(v) for v in value):
        raise SchemaError('{}.{}'.format(where, key), 'expected {} numbers'.format(count))
    return [float(v) for v in value]


def _camera(defaults, section, where):
    merged = dict(defaults)
    merged.update(section.get('camera') or {})

    values = {}
    for name in CAMERA_FIELDS:
        if name not in merged or not _is_number(merged[name]):
            raise SchemaError('{}.camera.{}'.format(where, name))
        values[name] = merged[name]

    for name in ('width', 'height'):
        if values[name] != int(values[name]):
            raise SchemaError('{}.camera.{}'.format(where, name), 'expected an integer')

    try:
        return Camera(**values)
    except InputError as err:
        raise SchemaError('{}.camera'.format(where), err.message)


class _Loader(object):
    # resolves paths and loads each OBJ once.

    def __init__(self, base_dir):
        self.base_dir = base_dir
        self.meshes = {}

    def path(self, section, key, where, required=False):
        value = section.get(key)

        if value is None:
            if required:
                raise SchemaError('{}.{}'.format(where, key))
            return None

        if not isinstance(value, str) or not value:
            raise SchemaError('{}.{}'.format(where, key), 'expected a path')

        path = os.path.normpath(os.path.join(self.base_dir, value))
        if not os.path.isfile(path):
            raise FileNotFound(path)

        return path

    def mesh(self, path, instance):
        if path is None:
            return None

        key = (path, Instance(instance))
        if key not in self.meshes:
            self.meshes[key] = load_obj(path, instance)
            logger.debug('loaded {}: {}'.format(path, self.meshes[key]))

        return self.meshes[key]


def _scene(loader, defaults, section, where, inherited=None):
    if not isinstance(section, dict):
        raise SchemaError(where, 'expected an object')

    inherited = inherited or {}
    camera = _camera(defaults, section, where)

    hand_path = loader.path(section, 'hand_obj', where)
    object_path = loader.path(section, 'object_obj', where) or inherited.get('object_obj')
    texture_path = loader.path(section, 'object_texture', where) or inherited.get('object_texture')
    image_path = loader.path(section, 'image', where, required=(where == 'source'))

    if hand_path is None and object_path is None:
        raise SchemaError('{}.hand_obj'.format(where), 'a scene needs a hand or an object mesh')

    rotation = None
    translation = None
    if object_path is not None:
        rotation = _numbers(section, 'object_rotation', 9, where) if 'object_rotation' in section else None
        translation = _numbers(section, 'object_translation', 3, where) if 'object_translation' in section else None

    scene = Scene(camera,
                  hand=loader.mesh(hand_path, Instance.HAND),
                  obj=loader.mesh(object_path, Instance.OBJECT),
                  rotation=rotation,
                  translation=translation,
                  image=image_path,
                  object_texture=texture_path)

    return scene, {'object_obj': object_path, 'object_texture': texture_path}


def _options(section):
    if section is None:
        return RunOptions()

    if not isinstance(section, dict):
        raise SchemaError('output', 'expected an object')

    options = RunOptions()
    checks = {
        'atlas_size': lambda v: _is_number(v) and v == int(v),
        'margin': _is_number,
        'dilation': lambda v: _is_number(v) and v == int(v),
        'threads': lambda v: _is_number(v) and v == int(v),
        'skip_fusion': lambda v: isinstance(v, bool),
        'dump_intermediate': lambda v: isinstance(v, bool),
    }

    for name, value in section.items():
        if name not in checks:
            raise SchemaError('output.{}'.format(name), 'unknown option')
        if not checks[name](value):
            raise SchemaError('output.{}'.format(name))
        setattr(options, name, int(value) if name in ('atlas_size', 'dilation', 'threads') else value)

    return options.validate()


def parse_scene_dict(config: dict, base_dir: str = '.'):
    """
    @type  config:   Dictionary
    @param config:   Decoded configuration document
    @type  base_dir: String
    @param base_dir: (Optional, def='.') Directory relative paths resolve against

    @raise SchemaError:      A field is missing or invalid (field path in the message).
    @raise FileNotFound:     A referenced file does not exist.
    @raise TopologyMismatch: Source and target meshes do not share face lists.
    @rtype:  Tuple
    @return: (source Scene, target Scene, RunOptions)
    """

    if not isinstance(config, dict):
        raise SchemaError('config', 'expected a JSON object')

    for name in ('source', 'target'):
        if name not in config:
            raise SchemaError(name)

    defaults = config.get('camera') or {}
    if not isinstance(defaults, dict):
        raise SchemaError('camera', 'expected an object')

    loader = _Loader(base_dir)
    source, inherited = _scene(loader, defaults, config['source'], 'source')
    target, _ = _scene(loader, defaults, config['target'], 'target', inherited)

    if (source.hand is None) != (target.hand is None):
        raise TopologyMismatch('hand present in only one of source and target')

    if (source.object is None) != (target.object is None):
        raise TopologyMismatch('object present in only one of source and target')

    if source.hand is not None:
        validate_topology(source.hand, target.hand)

    if source.object is not None and source.object is not target.object:
        validate_topology(source.object, target.object)

    return source, target, _options(config.get('output'))


def parse_scene(path):
    """
    Read and validate a scene configuration file.

    @raise FileNotFound: No such file.
    @raise SchemaError:  The file is not valid JSON or violates the schema.
    """

    if not os.path.isfile(path):
        raise FileNotFound(path)

    with open(path, 'r') as config_file:
        try:
            config = json.load(config_file)
        except ValueError as err:
            raise SchemaError('config', 'invalid JSON ({})'.format(err))

    return parse_scene_dict(config, os.path.dirname(os.path.abspath(path)))
