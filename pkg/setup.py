import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "ttsalab._core",
        ["src/ttsalab/_core.pyx"],
        include_dirs=[numpy.get_include()],
        # keep a*b+c unfused so the pure-Python fallback matches bit for bit
        extra_compile_args=["-O2", "-ffp-contract=off"],
    )
]

setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": 3}),
)
