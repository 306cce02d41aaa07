"""Build script: compiles the optional Cython convolution kernels.

The package works without the extension (a numpy fallback is selected at
import time), so any build failure here downgrades to a pure install.
"""

import os
import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    extra_compile_args = ["-O3", "-march=native", "-funroll-loops"]
    extra_link_args = []
    if sys.platform.startswith("linux") and not os.environ.get("ADVSCOPE_NO_OPENMP"):
        extra_compile_args.append("-fopenmp")
        extra_link_args.append("-fopenmp")

    ext_modules = cythonize(
        [
            Extension(
                "advscope.kernels._fastconv",
                ["src/advscope/kernels/_fastconv.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=extra_compile_args,
                extra_link_args=extra_link_args,
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    sys.stderr.write(f"advscope: building without compiled kernels ({exc})\n")

setup(ext_modules=ext_modules)
