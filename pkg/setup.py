import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("GWPERC_NO_EXTENSION"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "gwperc._kernels",
                ["src/gwperc/_kernels.pyx"],
                language="c++",
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
