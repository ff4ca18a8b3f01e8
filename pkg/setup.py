"""Build script: compiles the optional LSTM kernel extension.

The package works without the extension (a numpy fallback is selected at
import time), so any compile or link failure only costs speed, not
functionality.
"""

import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Degrade to the pure-Python package when the extension cannot build."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - toolchain dependent
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover - toolchain dependent
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(f"warning: compiled kernels unavailable, using numpy fallback ({exc})", file=sys.stderr)


ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "ecids._kernels._lstm_cy",
                sources=["src/ecids/_kernels/_lstm_cy.pyx"],
                include_dirs=[numpy.get_include()],
                # -ffast-math lets gcc vectorize the exp/tanh gate loops
                # through libmvec (hence the explicit mvec link).
                extra_compile_args=["-O3", "-ffast-math", "-march=native"],
                libraries=["mvec", "m"],
            )
        ],
        language_level=3,
    )
except ImportError as exc:  # pragma: no cover - build environment dependent
    print(f"warning: building without compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
