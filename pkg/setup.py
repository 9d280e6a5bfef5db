"""Build shim for the optional compiled kernel extension.

The package is fully functional without the extension (a pure-NumPy
fallback is selected at import time), so any build failure here degrades
to a pure-Python install instead of aborting.
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
                "quadmmpc._core",
                ["src/quadmmpc/_core.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    print(f"quadmmpc: skipping compiled kernels ({exc}); "
          "pure-Python backend will be used", file=sys.stderr)

setup(ext_modules=ext_modules)
