import re

from setuptools import find_packages, setup

with open("src/fedsim/_version.py") as f:
    VERSION = re.search(r'__version__ = "([^"]+)"', f.read()).group(1)

setup(
    name="fedsim",
    version=VERSION,
    package_dir={"": "src"},
    packages=find_packages(where="src", exclude=["tests", "tests.*"]),
    description="A deterministic federated-learning simulator for backdoor model-poisoning\
       attacks and norm-clipping / weak differential-privacy defenses.",
    license="MIT",
    python_requires=">=3.8",
    install_requires=[
        "numpy>=1.20",
        "custom_inherit>=2.3",
        'tomli>=1.1; python_version < "3.11"',
    ],
    extras_require={"test": ["pytest", "scipy"]},
    entry_points={"console_scripts": ["fedsim = fedsim.cli:main"]},
    classifiers=[
        "Development Status :: 3 - Alpha",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
    ],
)
