"""Build script: compiles the optional native kernel extension.

The extension is a speedup only; if Cython or a C compiler is missing the
package installs without it and falls back to the NumPy kernels at import.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "curbgeom._kernels._core",
                ["src/curbgeom/_kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
