from Cython.Build import cythonize
from setuptools import Extension, setup

setup(
    ext_modules=cythonize(
        [Extension("volcal._stepping_cy", ["src/volcal/_stepping_cy.pyx"])],
        language_level=3,
    )
)
