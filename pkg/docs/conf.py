# -*- coding: utf-8 -*-
#
# topoflow documentation build configuration file.
#
# Build with: sphinx-build -b html docs docs/_build/html

import os
import sys

sys.path.insert(0, os.path.abspath('..'))

from topoflow.defines import __version__  # noqa: E402

extensions = ['sphinx.ext.autodoc']

# epytext fields (@param, @rtype, ...) stay readable as plain text.
autodoc_member_order = 'bysource'
autodoc_default_options = {'members': True, 'undoc-members': False}

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'topoflow'
copyright = u'2026, The topoflow developers'

version = __version__
release = __version__

exclude_patterns = ['_build']
pygments_style = 'sphinx'

html_theme = 'default'
htmlhelp_basename = 'topoflowdoc'

latex_documents = [
    ('index', 'topoflow.tex', u'topoflow Documentation', u'The topoflow developers', 'manual'),
]

man_pages = [
    ('index', 'topoflow', u'topoflow Documentation', [u'The topoflow developers'], 1),
]
