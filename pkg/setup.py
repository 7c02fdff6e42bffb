"""Build the optional Cython chain kernel.

The package works without it: cludi._kernels falls back to a pure numpy
implementation when the extension is missing or CLUDI_FORCE_FALLBACK is set.
"""

import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

PYX = "src/cludi/_kernels/_chain.pyx"

extensions = [
    Extension(
        "cludi._kernels._chain",
        sources=[PYX],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
] if os.path.exists(PYX) else []

setup(
    ext_modules=cythonize(
        extensions,
        language_level=3,
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
)
