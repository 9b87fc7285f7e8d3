"""Builds the optional Cython fast path for the row-wise kernels.

The package works without the extension (a NumPy fallback is selected at
import time), so failures here only cost speed. Set LOGLENS_SKIP_EXT=1 to
force a pure-Python install.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("LOGLENS_SKIP_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "loglens.kernels._fastpath",
                    ["src/loglens/kernels/_fastpath.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level="3",
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
