"""Builds the optional compiled kernels.

The package runs without them (sbsim.kernels falls back to pure Python),
so a failed extension build only costs speed, not functionality.

-ffp-contract=off keeps the C arithmetic bit-identical to CPython floats:
the fallback and the extension must produce byte-identical simulations.
"""

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "sbsim.kernels._core",
                ["src/sbsim/kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
