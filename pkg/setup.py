"""Build script for the optional compiled kernel core.

The extension accelerates the O(N^2) pairwise loops.  If it cannot be
built (no compiler, no Cython), installation proceeds anyway and the
package falls back to the pure-numpy kernels at import time.
"""

import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """build_ext that degrades to the pure-Python package on failure."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - toolchain dependent
            sys.stderr.write(
                "warning: compiled kernels not built (%s); "
                "palign will use the numpy fallback\n" % exc
            )

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover - toolchain dependent
            sys.stderr.write(
                "warning: failed to compile %s (%s); using numpy fallback\n"
                % (ext.name, exc)
            )


def _extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:  # pragma: no cover - build environment dependent
        return []
    return cythonize(
        ["src/palign/_speedups.pyx"],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


setup(
    ext_modules=_extensions(),
    cmdclass={"build_ext": OptionalBuildExt},
)
