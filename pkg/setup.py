"""
Handles setup for the module
"""
import setuptools

with open("README.md", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name="iodine-frequency-standard",
    version="1.0.0",
    description="Simulator of an iodine-stabilized Ar+ laser frequency standard",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(),
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.8",
        "pandas>=1.5",
        "allantools>=2019.9",
        'tomli>=2.0; python_version<"3.11"',
    ],
    entry_points={
        "console_scripts": [
            "iodine-standard = iodine_standard.runner.scenario_runner:main",
        ]
    },
)
