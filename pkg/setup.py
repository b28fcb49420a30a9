"""Build the optional Cython kernels; the package works without them."""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("SCORELINE_NO_EXT"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("scoreline._ckernels", ["src/scoreline/_ckernels.pyx"])],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
