import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# -ffp-contract=off keeps the compiled kernels bit-identical to the pure
# numpy fallback (no FMA contraction), which the parity tests rely on.
extensions = [
    Extension(
        "bifluid._kernels._compiled",
        ["src/bifluid/_kernels/_compiled.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

if cythonize is not None:
    ext_modules = cythonize(
        extensions, compiler_directives={"language_level": "3", "boundscheck": False}
    )
else:
    ext_modules = []

setup(ext_modules=ext_modules)
