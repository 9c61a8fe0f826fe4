import logging

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

log = logging.getLogger("isoha.setup")


class OptionalBuildExt(build_ext):
    """Build the C speedups if a toolchain is available, else fall back.

    The package is fully functional with the pure-Python kernels; the
    extension only accelerates the per-message hot path.
    """

    def run(self):
        try:
            super().run()
        except Exception as exc:  # toolchain missing or broken
            log.warning("C speedups not built (%s); using pure-Python kernels", exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            log.warning("failed to compile %s (%s); using pure-Python kernels", ext.name, exc)


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    return cythonize(
        [
            Extension(
                "isoha.codec._speedups",
                ["src/isoha/codec/_speedups.pyx"],
                extra_compile_args=["-O2"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": OptionalBuildExt},
)
