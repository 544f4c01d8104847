from setuptools import Extension, setup
from Cython.Build import cythonize

# -ffp-contract=off: the compiled kernels must round exactly like the pure
# Python fallback (separate multiply + add, no FMA fusion), so the two
# backends stay bit-identical.
ext_modules = cythonize(
    [
        Extension(
            "faultlab._kernels_c",
            ["src/faultlab/_kernels_c.pyx"],
            extra_compile_args=["-O3", "-ffp-contract=off"],
        )
    ],
    language_level=3,
)

setup(ext_modules=ext_modules)
