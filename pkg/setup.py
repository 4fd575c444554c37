import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "ngrc._kernels._core",
                ["src/ngrc/_kernels/_core.pyx"],
                # no FMA contraction: keeps results bit-for-bit comparable
                # with the pure-Python kernels
                extra_compile_args=["-O3", "-ffp-contract=off"],
                include_dirs=[numpy.get_include()],
                # pure-Python kernels take over if this extension fails to build
                optional=True,
            )
        ],
        language_level=3,
    )
else:
    ext_modules = []

setup(ext_modules=ext_modules)
