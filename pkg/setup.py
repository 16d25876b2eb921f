# -*- coding: utf-8 -*-

from setuptools import setup, find_packages


with open('README.md') as f:
    readme = f.read()

with open('requirements.txt') as f:
    requirements = [line.strip() for line in f if line.strip() and not line.startswith('pytest')]

setup(
    name='topoflow',
    version='0.3.0',
    description='Occlusion-aware topology modeling for hand-object image synthesis',
    long_description=readme,
    long_description_content_type='text/markdown',
    author='The topoflow developers',
    license='GPL-2.0-or-later',
    python_requires='>=3.8',
    install_requires=requirements,
    packages=find_packages(exclude=('tests', 'docs')),
    entry_points={
        'console_scripts': ['topoflow=topoflow.cli:main'],
    },
)
