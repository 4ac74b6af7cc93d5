from setuptools import setup, find_packages

setup(
    name="cpks",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "tests.*"]),
    include_package_data=True,
    install_requires=[
        "numpy>=1.26.0",
        "scipy>=1.11.0",
        "pydantic>=2.5.0",
        "pyyaml>=6.0.1",
        "click>=8.1.7",
        "rich>=13.7.0",
    ],
    entry_points={
        "console_scripts": [
            "cpks=src.cli:main",
        ],
    },
    python_requires=">=3.11",
    description="Chemotaxis channel simulator near Couette flow and inequality lab",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Topic :: Scientific/Engineering :: Physics",
    ],
)
