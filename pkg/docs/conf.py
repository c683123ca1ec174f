# -*- coding: utf-8 -*-
#
# Configuration file for the Sphinx documentation builder.
# http://www.sphinx-doc.org/en/stable/config

# -- Path setup --------------------------------------------------------------

import os
import sys
sys.path.insert(0, os.path.abspath('..'))


# -- Project information -----------------------------------------------------

project = 'pyrico'
copyright = '2026, the pyrico developers'
author = 'the pyrico developers'

# The short X.Y version
version = '1.0'
# The full version, including alpha/beta/rc tags
release = 'v1.0.0'


# -- General configuration ---------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.viewcode',
]

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'
language = None
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']
pygments_style = 'sphinx'

# Rendering the API pages does not need a running dask
autodoc_mock_imports = ['dask', 'distributed']


# -- Options for HTML output -------------------------------------------------

html_theme = 'sphinxdoc'
html_static_path = ['_static']
htmlhelp_basename = 'pyricodoc'


# -- Options for LaTeX output ------------------------------------------------

latex_elements = {
    'classoptions': ',openany,oneside'  # Remove blank pages at end of chapters
}

latex_documents = [
    (master_doc, 'pyrico.tex', 'pyrico Documentation', author, 'manual'),
]


# -- Options for manual page output ------------------------------------------

man_pages = [
    (master_doc, 'pyrico', 'pyrico Documentation', [author], 1)
]
