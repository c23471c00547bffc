"""Build script for the compiled stencil kernels.

Set NONDIV_SKIP_EXT=1 to install without the extension; the package then
falls back to the pure-numpy kernels at import time.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("NONDIV_SKIP_EXT", "0") != "1":
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "nondiv.kernels._stencil",
                ["src/nondiv/kernels/_stencil.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
