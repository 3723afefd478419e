"""Build script for the optional compiled kernels.

The package is pure Python plus one Cython extension holding the numeric
hot loops (covariance blocks and acquisition scoring).  When Cython or a
C compiler is unavailable the extension is skipped and the package falls
back to the numpy reference kernels at import time.  Set ALBO_SKIP_EXT=1
to force a pure-Python build.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("ALBO_SKIP_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "albo.kernels._core",
                    ["src/albo/kernels/_core.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
