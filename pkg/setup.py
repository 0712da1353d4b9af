import os
import glob

from setuptools import setup, find_namespace_packages

setup(name                 = "crjet",
      version              = "0.1.0",
      description          = "Exact jet determination and complete differential systems for CR maps",
      long_description     = "Truncated power series engine, invariants (Levi form, Hörmander numbers, finite nondegeneracy), Segre chains, the reflection pipeline and ODE reconstruction for CR maps between generic real submanifolds given by polynomial models.",
      author               = "J. Dowell",
      author_email         = "jdowell@unm.edu",
      license              = 'GPL',
      classifiers          = ['Development Status :: 4 - Beta',
                              'Intended Audience :: Science/Research',
                              'License :: OSI Approved :: GNU General Public License (GPL)',
                              'Topic :: Scientific/Engineering :: Mathematics'],
      packages             = find_namespace_packages(include=['crjet', 'crjet.*']),
      package_data         = {'crjet': ['data/*.model', 'data/*.json', 'data/jets/*.json']},
      scripts              = glob.glob('scripts/*.py'),
      include_package_data = True,
      python_requires      = '>=3.8',
      install_requires     = ['numpy', 'scipy', 'sympy'],
      zip_safe             = False
)
