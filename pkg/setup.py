"""Build script for the compiled contact-growth kernel.

The extension is optional: if a C compiler is unavailable the install
still succeeds and the package falls back to the pure-Python kernel at
import time (see nucleoforge.internuclear).
"""

from setuptools import setup
from setuptools.extension import Extension

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None:
    ext = Extension(
        "nucleoforge._growth",
        sources=["src/nucleoforge/_growth.pyx"],
    )
    ext.optional = True
    extensions = cythonize([ext], language_level="3")

setup(ext_modules=extensions)
