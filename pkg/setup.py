#!/usr/bin/env python3
"""
Setup script for the ginzburg_lod package.
"""
from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

with open("requirements.txt", "r", encoding="utf-8") as fh:
    requirements = [line.strip() for line in fh if line.strip() and not line.startswith("#")]

setup(
    name="ginzburg_lod",
    version="0.1.0",
    description="Ginzburg-Landau energy minimization in P1 finite element and localized orthogonal decomposition spaces",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    classifiers=[
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires=">=3.9",
    install_requires=[requirement for requirement in requirements if not requirement.startswith("pytest")],
    extras_require={"test": [requirement for requirement in requirements if requirement.startswith("pytest")]},
    entry_points={
        "console_scripts": [
            "ginzburg-lod=ginzburg_lod.main:main",
        ],
    },
)
