"""Build script for the optional compiled kernel extension.

The package works without the extension (a pure-Python fallback is selected
at import time), so a missing compiler or Cython only costs speed, not
functionality.  Floating-point contraction is disabled when compiling: the
compiled kernels are required to produce bit-identical results to the pure
backend, and FMA contraction would break that.
"""

import sys

from setuptools import Extension, setup


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError as exc:
        print(f"vibench: skipping compiled kernels ({exc})", file=sys.stderr)
        return []

    ext = Extension(
        "vibench._kernels",
        ["src/vibench/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=_extensions())
