"""Build script for the compiled kernel core.

The Cython extension is optional: if it fails to build or import, the
package falls back to the pure-NumPy kernels at import time.
"""

import numpy
from setuptools import setup
from setuptools.extension import Extension

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    compiler_directives = {
        "boundscheck": False,
        "wraparound": False,
        "cdivision": True,
        "language_level": "3",
    }
    ext_modules = cythonize(
        [
            Extension(
                "grainforge.kernels._cykernels",
                sources=["src/grainforge/kernels/_cykernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3", "-march=native"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives=compiler_directives,
    )

setup(ext_modules=ext_modules)
