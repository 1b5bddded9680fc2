from setuptools import (
    find_packages,
    setup
)


package_name = 'roadcover'
version = '0.1.0'

install_requires = [
    'numpy'
]

extras_require = {
    'tests': [
        'pytest',
        'coverage',
        'pytest-cov'
    ]
}


setup(
    name=package_name,
    version=version,
    description='Directional sensor placement along roads',
    long_description=open('README.rst').read(),
    license='MIT',
    keywords='sensor placement coverage genetic algorithm',
    packages=find_packages(exclude=['contrib', 'docs', 'tests*']),
    package_data={package_name: ['data/*.scn', 'data/*.json', 'data/*.cfg']},
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'Operating System :: POSIX :: Linux',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
    ],
    install_requires=install_requires,
    extras_require=extras_require,
    entry_points={
        'console_scripts': [
            'roadcover=roadcover.cli:main',
        ],
    },
)
