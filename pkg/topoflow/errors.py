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
Exception hierarchy.

Every error raised by topoflow derives from L{TFError}. Errors caused by
malformed or inconsistent inputs derive from L{InputError} and map to exit
code 2 on the command line, everything else maps to exit code 1.
"""

from topoflow.defines import EXIT_INTERNAL, EXIT_INVALID_INPUT


class TFError(Exception):
    """
    Base class for all topoflow exceptions.

    For example, to raise a generic error you can use::

        raise TFError('Badness occurred.')
    """

    exit_code = EXIT_INTERNAL

    def __init__(self, message: str = ''):
        """
        @type  message: String
        @param message: Human readable description of the failure
        """

        super().__init__(message)
        self.message = message

    def __str__(self):
        return '{}: {}'.format(self.__class__.__name__, self.message) if self.message else self.__class__.__name__


class InputError(TFError):
    """Malformed or inconsistent input data."""

    exit_code = EXIT_INVALID_INPUT


# geometry.

class ParseError(InputError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__('line {}: {}'.format(line, reason))


class EmptyMesh(InputError):
    pass


class NonOrthonormal(InputError):
    pass


class BehindCamera(InputError):
    def __init__(self, vertex: int, z: float):
        self.vertex = vertex
        self.z = z
        super().__init__('vertex {} has camera-frame z = {!r}'.format(vertex, z))


class CellTooSmall(InputError):
    pass


class TopologyMismatch(InputError):
    pass


class DegenerateTriangle(TFError):
    pass


# flow and composition.

class IndexOutOfRange(TFError):
    pass


class SizeMismatch(TFError):
    pass


class MissingObjectTexture(InputError):
    pass


class MissingUVs(InputError):
    pass


class UVOutOfRange(InputError):
    """A face's texture coordinates straddle a texture repeat seam."""


class LayoutMismatch(TFError):
    pass


class AllForeground(InputError):
    pass


class NoVisibleHand(TFError):
    pass


# metrics.

class DegenerateConfiguration(InputError):
    pass


class EmptyInput(InputError):
    pass


class EmptyVertices(InputError):
    pass


# serialization and configuration.

class BadMagic(InputError):
    pass


class TruncatedPayload(InputError):
    pass


class UnsupportedVersion(InputError):
    pass


class IoError(TFError):
    def __init__(self, path, reason):
        self.path = str(path)
        super().__init__('{}: {}'.format(self.path, reason))


class SchemaError(InputError):
    def __init__(self, field: str, reason: str = 'missing or invalid'):
        self.field = field
        self.reason = reason
        super().__init__('{}: {}'.format(field, reason))


class FileNotFound(InputError):
    def __init__(self, path):
        self.path = str(path)
        super().__init__(self.path)


class StageError(TFError):
    """
    Wraps a failure inside one pipeline stage so the driver can report the
    stage name. The exit code follows the wrapped error.
    """

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, 'exit_code', EXIT_INTERNAL)
        super().__init__('stage {}: {}'.format(stage, cause))
