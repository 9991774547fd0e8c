"""Build script for the optional compiled betweenness kernel.

The package works without the extension (a pure-Python kernel is selected
at import time), so the build degrades gracefully when Cython or a C
compiler is unavailable.  Set ORGSIGNALS_NO_EXT=1 to skip the extension
explicitly.
"""

import os

from setuptools import Extension, setup


def extensions():
    if os.environ.get("ORGSIGNALS_NO_EXT"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    return cythonize(
        [
            Extension(
                "orgsignals._betweenness",
                sources=["src/orgsignals/_betweenness.pyx"],
            )
        ],
        compiler_directives={"language_level": 3},
    )


setup(ext_modules=extensions())
