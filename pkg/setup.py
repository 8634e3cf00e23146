"""Build hooks for the optional compiled kernels.

The package is pure Python by default.  If Cython and a C compiler are
available, ``python setup.py build_ext --inplace`` compiles
``conntra._kernels._core``, which the package picks up automatically at
import time (see ``conntra/_kernels/__init__.py``).  Any build failure
degrades to the pure-numpy fallback instead of failing the install.
"""

import warnings

from setuptools import setup
from setuptools.command.build_ext import build_ext


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools.extension import Extension
    except ImportError:
        return []
    ext = Extension(
        "conntra._kernels._core",
        ["src/conntra/_kernels/_core.pyx"],
        include_dirs=[numpy.get_include()],
        # -ffp-contract=off keeps the compiled kernels on plain IEEE
        # mul/add so they track the numpy fallback closely.
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


class optional_build_ext(build_ext):
    """Treat extension build failures as a soft miss, not an install error."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, header mismatch, ...
            warnings.warn(f"compiled kernels skipped ({exc}); using pure-python fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"compiled kernels skipped ({exc}); using pure-python fallback")


setup(ext_modules=_extensions(), cmdclass={"build_ext": optional_build_ext})
