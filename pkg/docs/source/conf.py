# -*- coding: utf-8 -*-
#
# noisereversal documentation build configuration file

import sys, os

# the package lives under python/
sys.path.insert(0, os.path.abspath(os.path.join('..', '..', 'python')))

extensions = ['sphinx.ext.autodoc']

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'noisereversal'
copyright = u'2026, the noisereversal developers'

version = '0.1'
release = '0.1.0'

exclude_patterns = []
pygments_style = 'sphinx'

html_theme = 'nature'
html_static_path = ['_static']
htmlhelp_basename = 'noisereversaldoc'

latex_elements = {
}
latex_documents = [
  ('index', 'noisereversal.tex', u'noisereversal Documentation',
   u'the noisereversal developers', 'manual'),
]

man_pages = [
    ('index', 'noisereversal', u'noisereversal Documentation',
     [u'the noisereversal developers'], 1)
]

texinfo_documents = [
  ('index', 'noisereversal', u'noisereversal Documentation',
   u'the noisereversal developers', 'noisereversal',
   'Photon noise reversal by emulated mean-field relaxation.',
   'Miscellaneous'),
]
