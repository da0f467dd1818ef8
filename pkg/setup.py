"""Build script: compiles the optional Cython packing kernels.

Set CHRONOCHROMA_SKIP_EXT=1 to install without the compiled extension;
the package falls back to the pure-NumPy kernels at import time.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("CHRONOCHROMA_SKIP_EXT"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "chronochroma.nn._kernels_cy",
                    ["src/chronochroma/nn/_kernels_cy.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        print("Cython not available; building without compiled kernels")

setup(ext_modules=ext_modules)
