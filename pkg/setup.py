"""Build script: compiles the optional _kernels extension when possible.

The package works without the extension (a pure-Python fallback is selected
at import time); the extension only accelerates the hot sampling loops.
"""

import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext
from setuptools.errors import CCompilerError, ExecError, PlatformError
from setuptools.extension import Extension


class OptionalBuildExt(build_ext):
    """Build the extension if we can; fall back to pure Python if not."""

    def run(self):
        try:
            super().run()
        except (PlatformError, FileNotFoundError) as exc:
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except (CCompilerError, ExecError, PlatformError, FileNotFoundError) as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            f"warning: building the accelerator extension failed ({exc}); "
            "installing with the pure-Python backend only",
            file=sys.stderr,
        )


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        print(
            "warning: Cython not available; installing with the pure-Python "
            "backend only",
            file=sys.stderr,
        )
        return []
    exts = [
        Extension(
            "rocftp._kernels",
            ["src/rocftp/_kernels.pyx"],
            extra_compile_args=["-O3"],
        )
    ]
    return cythonize(exts, compiler_directives={"language_level": "3"})


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": OptionalBuildExt},
)
