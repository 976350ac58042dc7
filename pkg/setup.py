"""Build script for the optional compiled spectral-radius kernel.

The package works without the extension (a pure-numpy fallback is selected
at import time); building it makes stability-region scans roughly an order
of magnitude faster.  Set IMEXPEER_SKIP_EXT=1 to install without compiling.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("IMEXPEER_SKIP_EXT"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "imexpeer.kernels._speccore",
                    ["src/imexpeer/kernels/_speccore.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        pass

setup(ext_modules=ext_modules)
