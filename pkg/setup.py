import pathlib
from setuptools import setup, find_packages

HERE = pathlib.Path(__file__).parent

VERSION = '0.3.0'
PACKAGE_NAME = 'bilevellearn'
AUTHOR = 'bilevellearn developers'

LICENSE = 'Apache License 2.0'
DESCRIPTION = 'Bi-level learning of regularization parameters on closed parameter intervals'
LONG_DESCRIPTION = (HERE / "README.md").read_text()

INSTALL_REQUIRES = [
      'numpy',
      'scipy>=1.12',
      'ijson',
      'pycryptodome'
]

EXTRAS_REQUIRE = {
      'test': ['pytest']
}

setup(name=PACKAGE_NAME,
      version=VERSION,
      description=DESCRIPTION,
      long_description=LONG_DESCRIPTION,
      long_description_content_type="text/markdown",
      author=AUTHOR,
      license=LICENSE,
      install_requires=INSTALL_REQUIRES,
      extras_require=EXTRAS_REQUIRE,
      packages=find_packages(exclude=['tests']),
      package_data={'bilevellearn': ['schemas/*.json']},
      entry_points={'console_scripts': ['bilevellearn = bilevellearn.cli:main']}
      )
