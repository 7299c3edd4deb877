#!/usr/bin/env python

from setuptools import setup
from alarmsys import VERSION

setup(
  name             = 'alarmsys',
  version          = ".".join(str(x) for x in VERSION),
  description      = 'Cost-aware alarm systems for prescriptive process monitoring',
  author           = 'alarmsys contributors',
  license          = open("LICENSE.txt").read(),
  long_description = open("README.txt").read(),
  packages         = ['alarmsys'],
  install_requires = ['numpy>=1.17', 'pandas>=1.0'],
  tests_require    = ['hypothesis'],
  entry_points     = {
        'console_scripts': ['alarmsys = alarmsys.cli:main'],
  },
  classifiers      = [
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Information Analysis",
        "Topic :: Software Development :: Libraries :: Python Modules"
  ]
)
