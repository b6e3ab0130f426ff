import numpy
from setuptools import Extension, setup

# The compiled kernels are an optional speedup; the package falls back to the
# pure-Python mirrors in priopipe._kernels.pure when the extension is absent.
# No -ffast-math: the fallback must stay bit-identical to the compiled path.
try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "priopipe._kernels._speedups",
                sources=["src/priopipe/_kernels/_speedups.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": 3,
        },
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
