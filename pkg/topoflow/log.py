"""
Logging setup. Every module asks for a child of the C{topoflow} logger; the
level comes from the TOPOFLOW_LOG environment variable.
"""

import logging
import os
import sys

from topoflow.defines import LOG_ENV

_ROOT = 'topoflow'
_configured = False


class _PrefixFormatter(logging.Formatter):
    # [TOPO_LOG] for debug/info, [TOPO_ERR] for warnings and worse.
    def format(self, record):
        prefix = '[TOPO_ERR]' if record.levelno >= logging.WARNING else '[TOPO_LOG]'
        return '{} {}: {}'.format(prefix, record.name, record.getMessage())


def configure_logging(level=None):
    """
    Attach the stderr handler to the package logger.

    @type  level: String or Integer
    @param level: (Optional, def=$TOPOFLOW_LOG or WARNING) Log level to apply
    """

    global _configured

    if level is None:
        level = os.environ.get(LOG_ENV, 'WARNING')

    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.WARNING

    root = logging.getLogger(_ROOT)

    if not _configured:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(_PrefixFormatter())
        root.addHandler(handler)
        root.propagate = False
        _configured = True

    root.setLevel(level)
    return root


def get_logger(name: str) -> logging.Logger:
    if name.startswith(_ROOT):
        return logging.getLogger(name)
    return logging.getLogger('{}.{}'.format(_ROOT, name))
