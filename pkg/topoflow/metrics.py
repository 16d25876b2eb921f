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
Structure-preservation metrics: Procrustes alignment, PA-MPJPE, 3D PCK AUC
for hands, ADD and ADD-0.1D for objects, and dataset aggregation.

All distances are in millimeters.
"""

import csv
import json
import os

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import pdist

from topoflow.defines import NUM_HAND_JOINTS, PCK_MAX_MM, PCK_STEPS, ADD_DIAMETER_FRACTION
from topoflow.errors import (
    DegenerateConfiguration, EmptyInput, EmptyVertices, SchemaError, FileNotFound, InputError, NonOrthonormal,
)
from topoflow.log import get_logger
from topoflow.mesh import check_rotation, load_obj

logger = get_logger(__name__)

# errors this close to a PCK threshold count as within it; absorbs the
# round-off Procrustes alignment leaves on exact predictions.
PCK_EPS_MM = 1e-9

# ADD values this close (relative) to the diameter threshold fail it.
ADD_REL_EPS = 1e-12


def _points(points, name):
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise InputError('{} must be (N, 3), got {}'.format(name, points.shape))
    return points


class PoseSet(object):
    """Hand joints and object pose of one frame; either half may be absent"""

    def __init__(self, hand_joints=None, object_rotation=None, object_translation=None, object_vertices=None,
                 object_diameter=None, object_id=None):
        """
        @type  hand_joints:        Array (21, 3)
        @param hand_joints:        (Optional) Hand keypoints in millimeters
        @type  object_rotation:    Array (3, 3)
        @param object_rotation:    (Optional) Object rotation
        @type  object_translation: Array (3,)
        @param object_translation: (Optional) Object translation in millimeters, required with a rotation
        @type  object_vertices:    Array (N, 3)
        @param object_vertices:    (Optional) Canonical object points in millimeters
        @type  object_diameter:    Float
        @param object_diameter:    (Optional, def=computed from the vertices) Object diameter in millimeters
        @type  object_id:          String
        @param object_id:          (Optional) Registry key of the object

        @raise InputError:     Wrong joint count, a rotation without translation or a non-positive diameter.
        @raise NonOrthonormal: The object rotation is not orthonormal.
        """

        self.hand_joints = None
        self.object_rotation = None
        self.object_translation = None
        self.object_vertices = None
        self.object_diameter = None
        self.object_id = None if object_id is None else str(object_id)

        if hand_joints is not None:
            self.hand_joints = _points(hand_joints, 'hand joints')
            if len(self.hand_joints) != NUM_HAND_JOINTS:
                raise InputError('expected {} hand joints, got {}'.format(NUM_HAND_JOINTS, len(self.hand_joints)))

        if object_rotation is not None:
            if object_translation is None:
                raise InputError('object rotation given without a translation')
            self.object_rotation = np.asarray(object_rotation, dtype=np.float64).reshape(3, 3)
            self.object_translation = np.asarray(object_translation, dtype=np.float64).reshape(3)
            check_rotation(self.object_rotation)

        if object_vertices is not None:
            self.object_vertices = _points(object_vertices, 'object vertices')
            if object_diameter is None:
                object_diameter = diameter(self.object_vertices)

        if object_diameter is not None:
            self.object_diameter = float(object_diameter)
            if not self.object_diameter > 0:
                raise InputError('object diameter must be positive, got {}'.format(self.object_diameter))

    @property
    def has_hand(self):
        return self.hand_joints is not None

    @property
    def has_object(self):
        return self.object_rotation is not None


def diameter(vertices):
    """
    Exact maximum pairwise distance. The farthest pair always lies on the
    convex hull, so only hull vertices are compared when a hull exists.

    @raise EmptyVertices: No vertex given.
    """

    vertices = _points(vertices, 'vertices')

    if len(vertices) == 0:
        raise EmptyVertices('diameter of an empty point set')

    if len(vertices) == 1:
        return 0.0

    candidates = vertices
    if len(vertices) > 64:
        try:
            candidates = vertices[ConvexHull(vertices).vertices]
        except QhullError:
            # flat or collinear sets have no 3D hull.
            candidates = vertices

    return float(pdist(candidates).max())


def procrustes_align(pred, gt):
    """
    Similarity transform minimizing sum ||s R p_i + t - g_i||^2, reflections
    excluded (det R = +1).

    @type  pred: Array (N, 3)
    @param pred: Points to align
    @type  gt:   Array (N, 3)
    @param gt:   Reference points

    A prediction collapsed to a single point aligns onto the gt centroid
    (scale 0, identity rotation).

    @raise DegenerateConfiguration: Fewer than 3 points or gt of rank < 2.
    @rtype:  Tuple
    @return: (scale, rotation, translation, aligned pred)
    """

    pred = _points(pred, 'pred')
    gt = _points(gt, 'gt')

    if pred.shape != gt.shape:
        raise InputError('point counts differ: {} vs {}'.format(len(pred), len(gt)))

    if len(gt) < 3:
        raise DegenerateConfiguration('Procrustes needs at least 3 points, got {}'.format(len(gt)))

    mu_pred = pred.mean(axis=0)
    mu_gt = gt.mean(axis=0)
    centered_pred = pred - mu_pred
    centered_gt = gt - mu_gt

    spread = np.linalg.svd(centered_gt, compute_uv=False)
    if spread[0] <= 0 or spread[1] <= 1e-9 * spread[0]:
        raise DegenerateConfiguration('ground truth points have rank < 2')

    # spreads this far below the gt's are round-off around a single point.
    var_pred = (centered_pred ** 2).sum() / len(pred)
    if var_pred <= 1e-18 * (centered_gt ** 2).sum() / len(gt):
        return 0.0, np.eye(3), mu_gt, np.tile(mu_gt, (len(gt), 1))

    cov = centered_gt.T @ centered_pred / len(pred)
    u, d, vt = np.linalg.svd(cov)
    sign = np.diag([1.0, 1.0, 1.0 if np.linalg.det(u) * np.linalg.det(vt) >= 0 else -1.0])

    rotation = u @ sign @ vt
    scale = float(np.trace(np.diag(d) @ sign) / var_pred)
    translation = mu_gt - scale * rotation @ mu_pred
    aligned = scale * pred @ rotation.T + translation

    return scale, rotation, translation, aligned


def joint_errors(pred, gt, align: bool = True):
    """
    @rtype:  Array (N,)
    @return: Per-joint Euclidean errors, after Procrustes alignment when align is set.
    """

    pred = _points(pred, 'pred')
    gt = _points(gt, 'gt')

    if align:
        pred = procrustes_align(pred, gt)[3]
    elif pred.shape != gt.shape:
        raise InputError('point counts differ: {} vs {}'.format(len(pred), len(gt)))

    return np.linalg.norm(pred - gt, axis=1)


def pa_mpjpe(pred_joints, gt_joints):
    """Mean per-joint error after Procrustes alignment (millimeters)."""
    return float(joint_errors(pred_joints, gt_joints, align=True).mean())


def mpjpe(pred_joints, gt_joints):
    """Mean per-joint error without alignment (millimeters)."""
    return float(joint_errors(pred_joints, gt_joints, align=False).mean())


def pck_curve(errors, t_max: float = PCK_MAX_MM, steps: int = PCK_STEPS):
    """
    @type  errors: Array
    @param errors: Per-joint errors in millimeters, pooled over frames
    @type  t_max:  Float
    @param t_max:  (Optional, def=50) Largest threshold in millimeters
    @type  steps:  Integer
    @param steps:  (Optional, def=100) Uniform intervals over [0, t_max]

    @raise EmptyInput: No error given.
    @rtype:  Tuple
    @return: (thresholds, fraction of joints with error <= threshold)
    """

    errors = np.asarray(errors, dtype=np.float64).reshape(-1)

    if errors.size == 0:
        raise EmptyInput('no joint errors to evaluate')

    if (errors < 0).any() or not np.isfinite(errors).all():
        raise InputError('joint errors must be finite and non-negative')

    if not t_max > 0 or int(steps) < 1:
        raise InputError('PCK range needs t_max > 0 and steps >= 1, got {} and {}'.format(t_max, steps))

    thresholds = np.linspace(0.0, float(t_max), int(steps) + 1)
    ordered = np.sort(errors)
    pck = np.searchsorted(ordered, thresholds + PCK_EPS_MM, side='right') / errors.size

    return thresholds, pck


def pck_auc(errors, t_max: float = PCK_MAX_MM, steps: int = PCK_STEPS):
    """
    Area under the 3D PCK curve: trapezoidal mean of PCK over [0, t_max],
    as a percentage.
    """

    _, pck = pck_curve(errors, t_max, steps)
    return float(((pck[:-1] + pck[1:]) / 2.0).mean() * 100.0)


def add(pred_rotation, pred_translation, gt_rotation, gt_translation, vertices):
    """
    Average distance of model points between two poses (millimeters).

    @raise EmptyVertices: No model point given.
    """

    vertices = _points(vertices, 'vertices')

    if len(vertices) == 0:
        raise EmptyVertices('ADD needs at least one model point')

    pred_rotation = np.asarray(pred_rotation, dtype=np.float64).reshape(3, 3)
    gt_rotation = np.asarray(gt_rotation, dtype=np.float64).reshape(3, 3)
    offset = np.asarray(pred_translation, dtype=np.float64).reshape(3) - np.asarray(gt_translation, dtype=np.float64).reshape(3)

    # (R_p v + t_p) - (R_g v + t_g), grouped so equal rotations cancel exactly.
    diff = vertices @ (pred_rotation - gt_rotation).T + offset

    return float(np.linalg.norm(diff, axis=1).mean())


def add_01d(pred_rotation, pred_translation, gt_rotation, gt_translation, vertices, object_diameter):
    """
    @rtype:  Tuple
    @return: (ADD in millimeters, ADD < 0.1 diameter)
    """

    if not object_diameter > 0:
        raise InputError('object diameter must be positive, got {}'.format(object_diameter))

    value = add(pred_rotation, pred_translation, gt_rotation, gt_translation, vertices)
    threshold = ADD_DIAMETER_FRACTION * object_diameter

    return value, bool(value < threshold * (1.0 - ADD_REL_EPS))


class ObjectRegistry(object):
    """Canonical model points and diameters, loaded once per object"""

    def __init__(self, entries: dict, base_dir: str = '.'):
        """
        @type  entries:  Dictionary
        @param entries:  object_id -> {vertices_path, diameter_mm}
        @type  base_dir: String
        @param base_dir: (Optional, def='.') Directory relative paths resolve against
        """

        self.entries = entries
        self.base_dir = base_dir
        self._vertices = {}
        self._diameters = {}

    @classmethod
    def load(cls, path):
        """
        @raise FileNotFound: Registry file missing.
        @raise SchemaError:  Registry is not a JSON object of objects.
        """

        if not os.path.isfile(path):
            raise FileNotFound(path)

        with open(path, 'r') as registry_file:
            try:
                entries = json.load(registry_file)
            except ValueError as err:
                raise SchemaError('registry', 'invalid JSON ({})'.format(err))

        if not isinstance(entries, dict):
            raise SchemaError('registry', 'expected an object keyed by object id')

        for object_id, entry in entries.items():
            if not isinstance(entry, dict) or 'vertices_path' not in entry:
                raise SchemaError('registry.{}.vertices_path'.format(object_id))

        return cls(entries, os.path.dirname(os.path.abspath(path)))

    def __contains__(self, object_id):
        return str(object_id) in self.entries

    def vertices(self, object_id):
        object_id = str(object_id)

        if object_id not in self._vertices:
            if object_id not in self.entries:
                raise SchemaError('object_id', 'unknown object {!r}'.format(object_id))

            path = os.path.join(self.base_dir, self.entries[object_id]['vertices_path'])

            if not os.path.isfile(path):
                raise FileNotFound(path)

            if path.lower().endswith('.obj'):
                points = load_obj(path).vertices
            else:
                points = np.loadtxt(path, dtype=np.float64, ndmin=2)[:, :3]

            self._vertices[object_id] = np.asarray(points, dtype=np.float64)

        return self._vertices[object_id]

    def diameter(self, object_id):
        object_id = str(object_id)

        if object_id not in self._diameters:
            given = self.entries.get(object_id, {}).get('diameter_mm')
            self._diameters[object_id] = float(given) if given is not None else diameter(self.vertices(object_id))
            logger.debug('object {} diameter {:.3f} mm'.format(object_id, self._diameters[object_id]))

        return self._diameters[object_id]


def _field(record, name, shape, line_no):
    if name not in record:
        raise SchemaError('line {}: {}'.format(line_no, name))

    try:
        value = np.asarray(record[name], dtype=np.float64).reshape(shape)
    except (TypeError, ValueError):
        raise SchemaError('line {}: {}'.format(line_no, name), 'expected {} numbers'.format(int(np.prod(shape))))

    if not np.isfinite(value).all():
        raise SchemaError('line {}: {}'.format(line_no, name), 'non-finite value')

    return value


def read_predictions(path):
    """
    Read one JSON record per line. Blank lines are skipped.

    @raise FileNotFound: File missing.
    @raise SchemaError:  A line is not a JSON object.
    @raise EmptyInput:   No record in the file.
    @rtype:  List
    @return: (line number, record) pairs.
    """

    if not os.path.isfile(path):
        raise FileNotFound(path)

    records = []
    with open(path, 'r') as jsonl:
        for line_no, line in enumerate(jsonl, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except ValueError as err:
                raise SchemaError('line {}'.format(line_no), 'invalid JSON ({})'.format(err))
            if not isinstance(record, dict):
                raise SchemaError('line {}'.format(line_no), 'expected a JSON object')
            records.append((line_no, record))

    if not records:
        raise EmptyInput('{} holds no prediction records'.format(path))

    return records


def _frame_poses(record, registry, line_no):
    # (prediction, ground truth) PoseSets of one record.
    poses = []

    for prefix in ('pred', 'gt'):
        hand_joints = None
        if 'pred_joints' in record or 'gt_joints' in record:
            hand_joints = _field(record, prefix + '_joints', (NUM_HAND_JOINTS, 3), line_no)

        rotation = translation = vertices = object_diameter = object_id = None
        if 'object_id' in record:
            if registry is None:
                raise SchemaError('line {}: object_id'.format(line_no), 'no object registry given')

            object_id = str(record['object_id'])
            rotation = _field(record, prefix + '_R', (3, 3), line_no)
            translation = _field(record, prefix + '_t', (3,), line_no)

            if prefix == 'gt':
                vertices = registry.vertices(object_id)
                object_diameter = registry.diameter(object_id)

        try:
            poses.append(PoseSet(hand_joints, rotation, translation, vertices, object_diameter, object_id))
        except NonOrthonormal as err:
            raise SchemaError('line {}: {}_R'.format(line_no, prefix), err.message)

    return poses[0], poses[1]


def evaluate(records, registry: ObjectRegistry = None, t_max: float = PCK_MAX_MM, steps: int = PCK_STEPS):
    """
    Aggregate hand and object metrics over a set of frames. Hand PCK pools
    the Procrustes-aligned per-joint errors of all frames. Frames without
    hand joints or without an object id contribute to one half only.

    @type  records:  List
    @param records:  (line number, record) pairs from read_predictions()
    @type  registry: ObjectRegistry
    @param registry: (Optional) Object models, required when records carry object poses

    @raise EmptyInput:  No record.
    @raise SchemaError: A record violates the schema (line number in the field path).
    @rtype:  Dictionary
    @return: Report with hand AUC / PA-MPJPE and per-object ADD-0.1D.
    """

    if not records:
        raise EmptyInput('no prediction records')

    aligned = []
    raw = []
    per_frame_pa = []
    per_frame_mpjpe = []
    objects = {}

    for line_no, record in records:
        pred, gt = _frame_poses(record, registry, line_no)

        if gt.has_hand:
            errors = joint_errors(pred.hand_joints, gt.hand_joints, align=True)
            unaligned = joint_errors(pred.hand_joints, gt.hand_joints, align=False)
            aligned.append(errors)
            raw.append(unaligned)
            per_frame_pa.append(errors.mean())
            per_frame_mpjpe.append(unaligned.mean())

        if gt.has_object:
            value, passed = add_01d(pred.object_rotation, pred.object_translation,
                                    gt.object_rotation, gt.object_translation,
                                    gt.object_vertices, gt.object_diameter)

            stats = objects.setdefault(gt.object_id, {'frames': 0, 'passed': 0, 'add_sum': 0.0})
            stats['frames'] += 1
            stats['passed'] += int(passed)
            stats['add_sum'] += value

    report = {'frames': len(records), 'pck_max_mm': float(t_max), 'pck_steps': int(steps)}

    if aligned:
        pooled = np.concatenate(aligned)
        thresholds, pck = pck_curve(pooled, t_max, steps)
        report['hand'] = {
            'frames': len(aligned),
            'auc': pck_auc(pooled, t_max, steps),
            'auc_unaligned': pck_auc(np.concatenate(raw), t_max, steps),
            'pa_mpjpe': float(np.mean(per_frame_pa)),
            'mpjpe': float(np.mean(per_frame_mpjpe)),
            'pck_thresholds_mm': thresholds.tolist(),
            'pck': pck.tolist(),
        }

    if objects:
        report['objects'] = {}
        for object_id in sorted(objects):
            stats = objects[object_id]
            report['objects'][object_id] = {
                'frames': stats['frames'],
                'add_01d': 100.0 * stats['passed'] / stats['frames'],
                'mean_add_mm': stats['add_sum'] / stats['frames'],
                'diameter_mm': registry.diameter(object_id),
            }
        report['average_add_01d'] = float(np.mean([entry['add_01d'] for entry in report['objects'].values()]))

    return report


def write_report(report, json_path, csv_path, label: str = 'prediction'):
    """
    Write report.json and a one-row CSV table: method, hand AUC, PA-MPJPE,
    ADD-0.1D per object, object average.
    """

    with open(json_path, 'w') as json_file:
        json.dump(report, json_file, indent=2, sort_keys=True)

    object_ids = sorted(report.get('objects', {}))
    hand = report.get('hand', {})

    def fmt(value):
        return '' if value is None else '{:.1f}'.format(value)

    with open(csv_path, 'w', newline='') as csv_file:
        writer = csv.writer(csv_file)
        writer.writerow(['Method', 'AUC', 'PAJPE'] + object_ids + ['Aver.'])
        writer.writerow([label, fmt(hand.get('auc')), fmt(hand.get('pa_mpjpe'))]
                        + [fmt(report['objects'][object_id]['add_01d']) for object_id in object_ids]
                        + [fmt(report.get('average_add_01d'))])
