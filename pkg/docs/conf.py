# Configuration file for the Sphinx documentation builder.
#
# For the full list of options see
# https://www.sphinx-doc.org/en/master/usage/configuration.html

# -- Path setup --------------------------------------------------------------

import os
import sys

docs_path = os.path.abspath('./')
src_path = os.path.abspath('../src')
sys.path.insert(0, src_path)

# -- Project information -----------------------------------------------------

project = 'trajnet'
copyright = '2024, Siracenco Serghei'
author = 'Siracenco Serghei'

# The full version, including alpha/beta/rc tags
release = '0.1.0'


# -- General configuration ---------------------------------------------------

extensions = [
'sphinx.ext.autodoc'
]

autodoc_mock_imports = ['ot', 'matplotlib']

templates_path = ['_templates']

exclude_patterns = ['_build', 'golden', 'Thumbs.db', '.DS_Store']


# -- Options for HTML output -------------------------------------------------

html_theme = 'classic'
