"""Build hook for the optional compiled tape evaluator.

The package is fully functional without the extension (a pure-Python
backend is selected at import); the build therefore tolerates a missing
Cython or a failing C compiler.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/acorns/_evalcore.pyx"],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
