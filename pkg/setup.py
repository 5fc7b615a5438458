"""Build hook for the optional compiled kernel core.

The package is fully functional without the extension; spahd._core falls back
to the NumPy implementation when the build is unavailable.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [Extension("spahd._kernels", ["src/spahd/_kernels.pyx"])],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
