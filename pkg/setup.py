import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("VOXGRAD_NO_EXT"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "voxgrad._ckernels",
                ["src/voxgrad/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                # no contraction: pointwise_linear must round like the numpy path
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )

setup(ext_modules=ext_modules)
