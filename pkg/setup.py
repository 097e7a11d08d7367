"""Build script for the optional compiled smoothing kernel.

The package works without the extension: ffselect._backend falls back to a
pure-numpy implementation when the compiled module is missing or when
FFSELECT_BACKEND=python is set.
"""

import os

from setuptools import Extension, setup

extensions = []
pyx = os.path.join("src", "ffselect", "_smooth_cy.pyx")
if os.path.exists(pyx):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        extensions = cythonize(
            [Extension("ffselect._smooth_cy", [pyx])],
            language_level="3",
        )

setup(ext_modules=extensions)
