# -*- coding: utf-8 -*-
#
# Sphinx configuration for alarmsys documentation.
#
# This file is execfile()d by sphinx-build with the current directory set to its containing dir.

# To generate the documentation, run:
# sphinx-build -b html path-to/alarmsys/doc path-to/alarmsys/doc/build/html

import sys, os


# Make sure we are importing the current alarmsys, and not an old version
# installed in the site-packages
parentdir = os.path.abspath(os.path.join(os.path.dirname(__file__), os.pardir))
if not os.path.exists(os.path.join(parentdir, 'alarmsys')):
    raise ImportError("Can not find alarmsys module at %s" % parentdir)
if os.path.exists(os.path.join(parentdir, 'tests')):
    sys.path.insert(1, os.path.join(parentdir, 'tests'))
sys.path.insert(1, parentdir)
if 'alarmsys' in sys.modules:
    del sys.modules['alarmsys']

import alarmsys

# -- General configuration -----------------------------------------------------

needs_sphinx = '1.0'

extensions = ['sphinx.ext.autodoc', 'sphinx.ext.intersphinx']

templates_path = ['templates']

source_suffix = '.rst'

master_doc = 'index'

project = u'alarmsys'
copyright = u'alarmsys contributors'

version = alarmsys._get_version()
release = version

exclude_patterns = ['build']

pygments_style = 'sphinx'

# Document class docstrings only; __init__ arguments are described there.
autoclass_content = 'class'
autodoc_member_order = 'bysource'


def skip(app, what, name, obj, skip, options):
    if name in ("__init__", "__repr__", "__len__", "__contains__", "__iter__",
                "__getitem__", "__eq__"):
        return False
    return skip


def setup(app):
    app.connect("autodoc-skip-member", skip)


intersphinx_mapping = {'python': ('https://docs.python.org/3', None),
                       'numpy': ('https://numpy.org/doc/stable', None),
                       'pandas': ('https://pandas.pydata.org/docs', None)}

# -- Options for HTML output ---------------------------------------------------

html_theme = 'default'
html_static_path = []
htmlhelp_basename = 'alarmsysdoc'

# -- Options for LaTeX output --------------------------------------------------

latex_documents = [
  ('index', 'alarmsys.tex', u'alarmsys Documentation',
   u'alarmsys contributors', 'manual'),
]
