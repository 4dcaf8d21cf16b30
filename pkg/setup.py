#!/usr/bin/env python
# -*- encoding: utf-8 -*-
"""
Setup mpctune package

"""
from glob import glob
from os.path import basename, splitext

from setuptools import find_packages
from setuptools import setup


def readme():
    """Read README contents
    """
    with open('README.md') as f:
        return f.read()


setup(
    name='mpctune',
    # use_scm_version=True,
    version=0.1,
    license='MIT License',
    description='Closed-loop MPC tuning with constrained Bayesian optimization',
    long_description=readme(),
    long_description_content_type="text/markdown",
    packages=find_packages('src'),
    package_dir={'': 'src'},
    py_modules=[splitext(basename(path))[0] for path in glob('src/*.py')],
    include_package_data=True,
    zip_safe=False,
    python_requires='>=3.8',
    classifiers=[
        # complete classifier list: http://pypi.python.org/pypi?%3Aaction=list_classifiers
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python',
        'Programming Language :: Python :: 3',
        'Topic :: Scientific/Engineering',
        'Topic :: Utilities',
    ],
    keywords=[
        'model predictive control', 'bayesian optimization', 'system identification'
    ],
    setup_requires=[
        'setuptools_scm'
    ],
    install_requires=[
        'numpy>=1.17',
        'scipy>=1.8',
        'pandas>=1.5',
    ],
    entry_points={
        'console_scripts': [
            'mpctune = mpctune.cli:main',
        ]
    },
)
