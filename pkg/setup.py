"""Build the optional compiled relaxation kernel.

The package works without the extension (a numpy wavefront fallback is
selected at import time); building it makes the Signorini sweeps roughly
an order of magnitude faster.
"""
import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "fb_lab.kernels._psor",
                ["src/fb_lab/kernels/_psor.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=extensions)
