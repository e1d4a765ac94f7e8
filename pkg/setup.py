from setuptools import setup


VERSION = (0, 1, 0, "")

info = {
    'name': 'noisereversal',
    'description': 'photon noise reversal by emulated mean-field relaxation',
    'packages': ['noisereversal'],
    'package_dir': {'': 'python'},
    'version': '.'.join(filter(None, map(str, VERSION))),
    'python_requires': '>=3.8',
    'install_requires': ['numpy>=1.17', 'scipy>=1.4'],
    'entry_points': {
        'console_scripts': ['noisereversal=noisereversal.cli:main'],
    },
    'license': 'BSD',
    'classifiers': [
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: BSD License",
        "Natural Language :: English",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Physics",
    ],
}

setup(**info)
