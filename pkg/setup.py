"""Build script. The compiled multiplier-search core is optional: if Cython and
a C compiler are available it is built, otherwise the package installs pure
Python and selects the NumPy fallback at import time.

    python setup.py build_ext --inplace
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "grls._lambda_cy",
                ["src/grls/_lambda_cy.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
