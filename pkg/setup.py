from setuptools import setup, find_packages

# Build script for the stablelab package.
# Metadata mirrors setup.cfg and pyproject.toml; the source tree lives under src/.

setup(
    # The distribution name.
    name='stablelab',
    version='0.1.0',  # The initial release version of the package.
    # A short description of the package.
    description='Potential-theory laboratory for stable and relativistic stable processes on kappa-fat domains.',
    # This will load the content of the README.md as the long description.
    long_description=open('README.md').read(),
    # Specifies the format of the long description.
    long_description_content_type='text/markdown',
    # Packages are discovered under src/.
    package_dir={'': 'src'},
    packages=find_packages(where='src'),
    classifiers=[  # Classifiers help users find your package on PyPI.
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'License :: OSI Approved :: MIT License',
        'Operating System :: OS Independent',
        'Topic :: Scientific/Engineering :: Mathematics',
    ],
    python_requires='>=3.8',  # The minimum Python version required.
    install_requires=[  # Runtime dependencies.
        'numpy>=1.20.0',  # Arrays, Philox streams and SeedSequence splitting.
        'scipy>=1.8.0',  # Special functions, quadrature and KS tests.
        'pandas>=1.5.0',  # CSV tables; lineterminator needs 1.5.
        'scikit-learn>=0.24.0',  # Log-log regressions and KD-tree lookups.
        'PyYAML>=5.4',  # Experiment configs.
    ],
    extras_require={  # Optional extra dependencies.
        'dev': [
            'pytest>=6.2.0',  # For running tests during development.
            'pytest-cov',
            'coverage',
            'hypothesis>=6.0',  # Property-based tests.
            'sphinx>=4.0.0',  # For generating documentation.
        ],
        'docs': [
            'sphinx>=4.0.0',  # For generating documentation.
        ],
    },
    entry_points={
        'console_scripts': ['stablelab=stablelab.cli:main'],
    },
    # This ensures that any non-Python files in your package are included.
    include_package_data=True,
    # Indicates whether the package can be reliably used if zipped (False means it's not guaranteed).
    zip_safe=False,
)
