import os
import sys

sys.path.insert(0, os.path.abspath("../src"))

project = "stablelab"
author = "stablelab contributors"
release = "0.1.0"

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.napoleon",
    "sphinx.ext.mathjax",
]

autodoc_member_order = "bysource"
html_theme = "alabaster"
