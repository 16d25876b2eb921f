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
Command line interface.

    topoflow generate scene.json --out out/
    topoflow raster|atlas|flow scene.json --out out/
    topoflow fuse --background b.png --object o.png --hand h.png --mask-hand mh.png --mask-foreground mf.png --out out/
    topoflow metrics predictions.jsonl --registry objects.json --out report/
    topoflow inspect out/flow_ts.tflo [--hex 64]

Exit codes: 0 success, 1 internal error, 2 invalid input.
"""

import argparse
import os
import sys

import numpy as np

from topoflow import imageio, metrics, tflo
from topoflow.buffers import FlowField, LayerSet, TopologyMap
from topoflow.compose import fuse
from topoflow.defines import (
    __version__, EXIT_OK, EXIT_INTERNAL, PCK_MAX_MM, PCK_STEPS, TFLO_MAGIC, TMAP_MAGIC,
    KIND_IMAGE, KIND_MASK, KIND_FACE_MAP, KIND_MANIFEST,
)
from topoflow.errors import TFError, FileNotFound
from topoflow.log import configure_logging, get_logger
from topoflow.topoflow import RunManifest, MANIFEST_NAME, generate

logger = get_logger(__name__)


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError('expected a positive integer, got {}'.format(text))
    return value


def _pipeline_flags(parser):
    parser.add_argument('config', help='scene configuration (JSON)')
    parser.add_argument('--out', required=True, metavar='DIR', help='output directory')
    parser.add_argument('--atlas-size', type=_positive_int, metavar='N', help='unified atlas side in pixels')
    parser.add_argument('--threads', type=_positive_int, metavar='N', help='rasterizer worker threads')
    parser.add_argument('--dilation', type=int, metavar='N', help='atlas dilation passes')
    parser.add_argument('--skip-fusion', action='store_true', default=None, help='stop before the final fusion')
    parser.add_argument('--dump-intermediate', action='store_true', default=None,
                        help='also write face maps, depth maps and layers')
    parser.add_argument('--object-texture', metavar='PATH', help='replace the configured object texture')


def build_parser():
    parser = argparse.ArgumentParser(prog='topoflow', description='Occlusion-aware hand-object topology modeling.')
    parser.add_argument('--version', action='version', version='topoflow {}'.format(__version__))
    parser.add_argument('-v', '--verbose', action='store_true', help='debug logging')

    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True

    _pipeline_flags(commands.add_parser('generate', help='run the whole pipeline'))
    _pipeline_flags(commands.add_parser('raster', help='rasterize the source, target and unified spaces'))
    _pipeline_flags(commands.add_parser('atlas', help='unified flow, visibility and unified texture'))
    _pipeline_flags(commands.add_parser('flow', help='target flows, coarse target, topology map and masks'))

    fuse_cmd = commands.add_parser('fuse', help='fuse background, object and hand layers')
    fuse_cmd.add_argument('--background', required=True, metavar='PNG')
    fuse_cmd.add_argument('--object', required=True, metavar='PNG')
    fuse_cmd.add_argument('--hand', required=True, metavar='PNG')
    fuse_cmd.add_argument('--mask-hand', required=True, metavar='PNG')
    fuse_cmd.add_argument('--mask-foreground', required=True, metavar='PNG')
    fuse_cmd.add_argument('--out', required=True, metavar='DIR')

    metrics_cmd = commands.add_parser('metrics', help='hand and object pose metrics')
    metrics_cmd.add_argument('predictions', help='JSON lines, one record per frame')
    metrics_cmd.add_argument('--registry', metavar='JSON', help='object registry')
    metrics_cmd.add_argument('--out', required=True, metavar='DIR')
    metrics_cmd.add_argument('--pck-max-mm', type=float, default=PCK_MAX_MM, metavar='F')
    metrics_cmd.add_argument('--pck-steps', type=_positive_int, default=PCK_STEPS, metavar='N')
    metrics_cmd.add_argument('--label', default='prediction', help='row label of the CSV table')

    inspect_cmd = commands.add_parser('inspect', help='summarize a TFLO, TMAP or PNG artifact')
    inspect_cmd.add_argument('artifact')
    inspect_cmd.add_argument('--hex', type=int, default=0, metavar='N', help='hex dump of the first N bytes')

    return parser


def cmd_generate(args, until=None):
    manifest = generate(args.config, args.out, object_texture=args.object_texture, until=until,
                        atlas_size=args.atlas_size, threads=args.threads, dilation=args.dilation,
                        skip_fusion=args.skip_fusion, dump_intermediate=args.dump_intermediate)

    for name in sorted(manifest.artifacts):
        print(os.path.join(args.out, name))

    return manifest


def cmd_fuse(args):
    layers = LayerSet(imageio.read_image(args.background),
                      imageio.read_image(args.object),
                      imageio.read_image(args.hand),
                      imageio.read_mask(args.mask_hand),
                      imageio.read_mask(args.mask_foreground))

    os.makedirs(args.out, exist_ok=True)
    manifest = RunManifest(None, args.out)
    imageio.write_image(os.path.join(args.out, 'final.png'), fuse(layers))
    manifest.add('final.png', KIND_IMAGE)
    manifest.status = 'ok'
    manifest.add(MANIFEST_NAME, KIND_MANIFEST)
    manifest.write(os.path.join(args.out, MANIFEST_NAME))

    print(os.path.join(args.out, 'final.png'))
    return manifest


def cmd_metrics(args):
    records = metrics.read_predictions(args.predictions)
    registry = metrics.ObjectRegistry.load(args.registry) if args.registry else None
    report = metrics.evaluate(records, registry, args.pck_max_mm, args.pck_steps)

    os.makedirs(args.out, exist_ok=True)
    json_path = os.path.join(args.out, 'report.json')
    csv_path = os.path.join(args.out, 'table.csv')
    metrics.write_report(report, json_path, csv_path, args.label)

    hand = report.get('hand')
    if hand:
        print('hand AUC: {:.2f}  PA-MPJPE: {:.2f} mm  MPJPE: {:.2f} mm'.format(
            hand['auc'], hand['pa_mpjpe'], hand['mpjpe']))
    for object_id, entry in sorted(report.get('objects', {}).items()):
        print('object {}: ADD-0.1D {:.1f}%  mean ADD {:.2f} mm'.format(object_id, entry['add_01d'], entry['mean_add_mm']))
    if 'average_add_01d' in report:
        print('average ADD-0.1D: {:.1f}%'.format(report['average_add_01d']))

    return report


def _channel_lines(values, valid):
    lines = []
    for channel in range(values.shape[2]):
        picked = values[..., channel][valid]
        if picked.size:
            lines.append('channel {}: min {:.4f} max {:.4f}'.format(channel, float(picked.min()), float(picked.max())))
        else:
            lines.append('channel {}: no valid entries'.format(channel))
    return lines


def inspect_artifact(path, hex_bytes: int = 0):
    """
    @raise FileNotFound:                        No such file.
    @raise BadMagic, TruncatedPayload, ...: Malformed TFLO/TMAP file.
    @rtype:  String
    @return: Human readable summary.
    """

    if not os.path.isfile(path):
        raise FileNotFound(path)

    with open(path, 'rb') as artifact:
        head = artifact.read(max(hex_bytes, 8))

    lines = ['file: {}'.format(path)]

    if head[:4] in (TFLO_MAGIC, TMAP_MAGIC):
        header = tflo.read_header(path)
        field = tflo.read_tflo(path)

        if isinstance(field, FlowField):
            values, valid = field.vectors, field.valid
        elif isinstance(field, TopologyMap):
            values, valid = field.values, field.valid
        else:
            values, valid = field[..., None], np.isfinite(field)

        lines += ['kind: {}'.format(header.kind),
                  'version: {}'.format(header.version),
                  'size: {}x{}'.format(header.width, header.height),
                  'channels: {}'.format(header.channels),
                  'valid: {:.1f}%'.format(100.0 * valid.mean())]
        lines += _channel_lines(values, valid)
    else:
        image = imageio.open_image(path)
        values = np.array(image)
        if values.ndim == 2:
            values = values[..., None]

        if image.mode in ('I;16', 'I'):
            kind, valid = KIND_FACE_MAP, values[..., 0] > 0
        elif image.mode in ('L', '1'):
            kind, valid = KIND_MASK, values[..., 0] > 0
        else:
            kind = KIND_IMAGE
            valid = values[..., 3] > 0 if values.shape[2] == 4 else np.ones(values.shape[:2], dtype=bool)

        lines += ['kind: {}'.format(kind),
                  'mode: {}'.format(image.mode),
                  'size: {}x{}'.format(image.width, image.height),
                  'channels: {}'.format(values.shape[2]),
                  'valid: {:.1f}%'.format(100.0 * valid.mean())]
        lines += _channel_lines(values.astype(np.float64), np.ones(values.shape[:2], dtype=bool))

    if hex_bytes > 0:
        lines.append(tflo.hex_dump(head[:hex_bytes]))

    return '\n'.join(lines)


def cmd_inspect(args):
    summary = inspect_artifact(args.artifact, args.hex)
    print(summary)
    return summary


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging('DEBUG' if args.verbose else None)

    try:
        if args.command == 'generate':
            cmd_generate(args)
        elif args.command in ('raster', 'atlas', 'flow'):
            cmd_generate(args, until=args.command)
        elif args.command == 'fuse':
            cmd_fuse(args)
        elif args.command == 'metrics':
            cmd_metrics(args)
        elif args.command == 'inspect':
            cmd_inspect(args)
    except TFError as err:
        logger.error(str(err))
        return err.exit_code
    except Exception as err:
        logger.exception('internal error: {}'.format(err))
        return EXIT_INTERNAL

    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
