import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "geofield._core",
                ["src/geofield/_core.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level="3",
        annotate=True,
    )
except ImportError:
    # no Cython: ship pure-python, backend.py falls back at import
    extensions = []

setup(ext_modules=extensions, zip_safe=False)
