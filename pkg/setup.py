"""Build script.  The compiled kernel extension is optional: if Cython or a C
compiler is missing the package installs in pure-Python form and selects the
numpy backend at import time."""
import os

from setuptools import setup, Extension

ext_modules = []
if os.environ.get("PATHSUM_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
        import numpy

        randlib = os.path.join(os.path.dirname(numpy.__file__), "random", "lib")
        ext = Extension(
            "pathsum.backends._ckernels",
            ["src/pathsum/backends/_ckernels.pyx"],
            include_dirs=[numpy.get_include()],
            library_dirs=[randlib],
            libraries=["npyrandom"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
        ext_modules = cythonize([ext], language_level=3)
    except Exception as exc:  # pragma: no cover - build-host dependent
        print("pathsum: skipping compiled kernels (%s)" % exc)

setup(ext_modules=ext_modules)
