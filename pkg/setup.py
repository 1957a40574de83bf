import os
import sys

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# HD_MMD_NO_EXT=1 skips the compiled core; the package then runs on its numpy
# fallback.  HD_MMD_PORTABLE=1 drops -march=native.
compile_args = ["-O3", "-ffp-contract=off"]
link_args = []
if not os.environ.get("HD_MMD_PORTABLE"):
    compile_args.append("-march=native")
if sys.platform != "win32":
    compile_args.append("-fopenmp")
    link_args.append("-fopenmp")

extensions = [
    Extension(
        "hdmmd._ext._core",
        ["src/hdmmd/_ext/_core.pyx"],
        include_dirs=[np.get_include(), "src/hdmmd/_ext"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=compile_args,
        extra_link_args=link_args,
    )
]

setup(
    ext_modules=[] if os.environ.get("HD_MMD_NO_EXT") else cythonize(
        extensions, compiler_directives={"language_level": "3"}
    ),
)
