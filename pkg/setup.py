"""Build script: compiles the bit-packing kernel extension when possible.

The package works without the extension (a pure-Python fallback is
selected at import), so a missing compiler only costs speed.
"""
from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("cohortq.kernels._bitpack_c", ["src/cohortq/kernels/_bitpack_c.pyx"])],
        language_level="3",
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
