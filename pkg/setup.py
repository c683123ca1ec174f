#!/usr/bin/env python3

"""setup.py: setuptools control"""


import re
from setuptools import setup

version = re.search(
    r'^__version__\s*=\s*"(.*)"',
    open('pyrico/cli.py').read(),
    re.M
    ).group(1)

with open('README.md', 'rb') as f:
    long_desc = f.read().decode('utf-8')

setup(name='pyrico',
      packages=['pyrico'],
      entry_points={'console_scripts': ['pyrico = pyrico.cli:main']},
      version=version,
      description='Placement optimizer and orchestration simulator for a disaggregated Near-RT RIC',
      long_description=long_desc,
      long_description_content_type='text/markdown',
      install_requires=['numpy', 'pyparsing', 'networkx', 'dask', 'distributed'],
      extras_require={'test': ['pytest']},
      python_requires=">=3.6")
