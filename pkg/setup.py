import os

from setuptools import setup

ext_modules = []
if os.environ.get("CONTEXTDB_PURE_PYTHON") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            ["src/contextdb/_kernels/_speedups.pyx"], language_level=3
        )
    except ImportError:
        # No Cython at build time: the package falls back to the pure
        # Python kernels at import.
        pass

setup(ext_modules=ext_modules)
