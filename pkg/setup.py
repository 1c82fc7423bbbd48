import os

from setuptools import setup

ext_modules = []
if os.environ.get("GENESTIM_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "genestim._kernels._core",
                    ["src/genestim/_kernels/_core.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        # No Cython available: the pure-python kernel backend is used instead.
        ext_modules = []

setup(ext_modules=ext_modules)
