"""Build script for the optional compiled compositing kernel.

The package works without the extension (a NumPy fallback is selected at
import time), so a failed Cython build should not block installation:
run ``pip install -e . --no-build-isolation`` and check
``clodgs.backend.available_backends()``.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "clodgs._kernel",
                ["src/clodgs/_kernel.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level="3",
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
