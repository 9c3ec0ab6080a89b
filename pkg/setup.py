#!/usr/bin/env python
from setuptools import find_packages, setup

# read the contents of README file
from os import path
from io import open  # for Python 2 and 3 compatibility

# get __version__ from _version.py
ver_file = path.join('ngnn', 'version.py')
with open(ver_file) as f:
    exec(f.read())

this_directory = path.abspath(path.dirname(__file__))


# read the contents of README.md
def readme():
    with open(path.join(this_directory, 'README.md'), encoding='utf-8') as f:
        return f.read()


# read the contents of requirements.txt
with open(path.join(this_directory, 'requirements.txt'), encoding='utf-8') as f:
    requirements = f.read().splitlines()

setup(
    name='ngnn-toolkit',
    version=__version__,
    description='NGNN: deeper graph neural networks with feedforward blocks inside GNN layers, on a numpy autodiff engine',
    long_description=readme(),
    long_description_content_type='text/markdown',
    keywords=['graph neural networks', 'GNN', 'autodiff', 'deep learning', 'neural networks'],
    packages=find_packages(),
    entry_points={
        "console_scripts": [
            "ngnn=ngnn.cli:cli",
        ]
    },
    zip_safe=False,
    include_package_data=True,
    install_requires=requirements,
    extras_require={'test': ['pytest']},
    python_requires='>=3.9',
    setup_requires=['setuptools>=38.6.0'],
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Education',
        'Intended Audience :: Science/Research',
        'Intended Audience :: Developers',
        'Intended Audience :: Information Technology',
        'License :: OSI Approved :: Apache Software License',
        'Programming Language :: Python :: 3',
        "Operating System :: OS Independent",
    ],
)
