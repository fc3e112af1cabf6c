"""Build script: compiles the optional fused-kernel extension.

The package works without the extension (pure numpy lane); a failed build
only disables the compiled lane. Set CROSSVID_SKIP_EXT=1 to skip the build.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("CROSSVID_SKIP_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "crossvid.kernels._fused",
                    ["src/crossvid/kernels/_fused.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
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
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
