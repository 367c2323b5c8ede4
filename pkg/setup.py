"""Build script: compiles the optional fast-kernel extension.

The package is fully functional without the extension (a numpy fallback is
selected at import time), so any compilation failure downgrades to a
pure-Python install instead of aborting.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "landmarkpipe.kernels._fast",
                ["src/landmarkpipe/kernels/_fast.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": 3},
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    print(f"landmarkpipe: skipping compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
