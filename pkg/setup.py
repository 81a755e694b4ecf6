#!/usr/bin/env python
from pathlib import Path
from setuptools import setup

here = Path(__file__).parent.absolute()

version_ns = {}
with open(here.joinpath("lmdp_lab", "_version.py")) as f:
    exec(f.read(), {}, version_ns)

__version__ = version_ns["__version__"]

deps = [
    "setuptools",
    "numpy",
    "scipy",
    "pandas",
    "rich",
    "ruamel.yaml",
    "json5",
    "jsonschema",
    "pydantic>=2",
    "joblib",
    "tomli; python_version < '3.11'",
]

setup(
    name="lmdp-lab",
    version=__version__,
    author="lmdp-lab contributors",
    license="BSD 3-clause",
    classifiers=[],
    description="Exact planning and sim-to-real gap experiments on tabular latent MDPs",
    long_description=open("README.md").read(),
    packages=["lmdp_lab", "lmdp_lab.cli", "lmdp_lab.core", "lmdp_lab.schemas"],
    entry_points={
        "console_scripts": [
            "lmdp-lab = lmdp_lab.cli.lab:main",
        ]
    },
    install_requires=deps,
    extras_require={"test": ["pytest", "hypothesis"]},
    package_data={"lmdp_lab": ["schemas/*.json"]},
    python_requires=">=3.8",
)
