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
@license: GNU General Public License 2.0 or later
"""

from topoflow.defines import __version__, Instance
from topoflow.errors import *
from topoflow.mesh import Mesh, Camera, Scene, load_obj, write_obj, apply_rigid_transform, project, validate_topology
from topoflow.atlas import AtlasLayout, build_grid_atlas, build_unified_atlas
from topoflow.buffers import RasterBuffers, FlowField, VisibilityMask, UnifiedTexture, TopologyMap, LayerSet
from topoflow.raster import rasterize, rasterize_atlas, barycentric
from topoflow.flow import (
    flow_unified_from_source, visibility_unified_from_source, assemble_unified_texture, flow_target_from_unified,
    synthesize_coarse_target, topology_map, split_topology_map, compose_flow_target_from_source, warp,
)
from topoflow.compose import analytic_masks, fuse, inpaint_background, fill_hand_holes
from topoflow.metrics import PoseSet, procrustes_align, pa_mpjpe, mpjpe, pck_auc, pck_curve, add, add_01d
from topoflow.tflo import read_tflo, write_tflo
from topoflow.scene import RunOptions, parse_scene
from topoflow.topoflow import TopoFlow, RunManifest, generate

__all__ = [
    "AtlasLayout",
    "Camera",
    "FlowField",
    "Instance",
    "LayerSet",
    "Mesh",
    "PoseSet",
    "RasterBuffers",
    "RunManifest",
    "RunOptions",
    "Scene",
    "TFError",
    "InputError",
    "TopoFlow",
    "TopologyMap",
    "UnifiedTexture",
    "VisibilityMask",
    "add",
    "add_01d",
    "analytic_masks",
    "apply_rigid_transform",
    "assemble_unified_texture",
    "barycentric",
    "build_grid_atlas",
    "build_unified_atlas",
    "compose_flow_target_from_source",
    "fill_hand_holes",
    "flow_target_from_unified",
    "flow_unified_from_source",
    "fuse",
    "generate",
    "inpaint_background",
    "load_obj",
    "mpjpe",
    "pa_mpjpe",
    "parse_scene",
    "pck_auc",
    "pck_curve",
    "procrustes_align",
    "project",
    "rasterize",
    "rasterize_atlas",
    "read_tflo",
    "split_topology_map",
    "synthesize_coarse_target",
    "topology_map",
    "validate_topology",
    "visibility_unified_from_source",
    "warp",
    "write_obj",
    "write_tflo",
]
