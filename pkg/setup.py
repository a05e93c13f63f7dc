"""Build the optional compiled kernel extension.

    python3 setup.py build_ext --inplace

The package works without the extension (a numpy fallback is selected at
import time); building it speeds up the row-norm / sampling hot loops.
"""
from setuptools import setup, Extension

import numpy

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = [
    Extension(
        "lpcoreset._kernels_c",
        ["src/lpcoreset/_kernels_c.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    ),
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
    if cythonize is not None
    else [],
)
