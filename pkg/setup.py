"""Builds the optional compiled n-gram hashing kernel.

The package works without it: emotod.hashgrams falls back to the pure-Python
implementation when the extension is missing.
"""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "emotod._hashgram",
                ["src/emotod/_hashgram.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
