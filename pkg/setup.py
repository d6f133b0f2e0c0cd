import os
from setuptools import setup, find_packages

setup(
    name             = "todaist",
    version          = "1.0.0",
    author           = "Steve Payne",
    author_email     = "todaist@iamsrp.com",
    description      = ("Solve the doubly-infinite Toda lattice by its inverse spectral transform"),
    license          = "BSD",
    keywords         = "toda lattice inverse spectral transform soliton jacobi",
    url              = "http://github.com/iamsrp/todaist/",
    packages         = find_packages(exclude=("tests",)),
    long_description = open(os.path.join(os.path.dirname(__file__), 'README.md')).read(),
    install_requires = [ "numpy",
                         "scipy",
                         "click",
                         "Pillow", ],
    extras_require   = { "test" : [ "pytest", ], },
    entry_points     = { "console_scripts" : [ "toda = todaist.cli:main", ], },
    classifiers      = [ "Development Status :: 4 - Beta",
                         "Environment :: Console",
                         "License :: OSI Approved :: MIT License",
                         "Natural Language :: English",
                         "Operating System :: Unix",
                         "Programming Language :: Python :: 3",
                         "Topic :: Scientific/Engineering :: Mathematics",
                         "Topic :: Scientific/Engineering :: Physics", ],
)
