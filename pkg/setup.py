"""Build script for the optional compiled kernel extension.

The package works without the extension (a pure numpy backend is selected
at import time), so the build is marked optional and failures are not
fatal.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext = Extension(
    "sessionbench._kernels._fast",
    ["src/sessionbench/_kernels/_fast.pyx"],
    include_dirs=[np.get_include()],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    optional=True,
)

setup(ext_modules=cythonize([ext], language_level="3") if cythonize else [])
