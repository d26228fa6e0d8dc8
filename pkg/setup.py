from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "risfp.core._fp_cy",
                ["src/risfp/core/_fp_cy.pyx"],
            )
        ],
        language_level="3",
    )
except ImportError:
    # Without Cython the package still installs; the pure-numpy backend
    # is selected at import time.
    ext_modules = []

setup(ext_modules=ext_modules)
