from setuptools import setup, find_packages

setup(
    name="advsr",
    version="0.1.0",
    description="Adversarial attacks, defenses and evaluation for speaker recognition models",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    install_requires=[
        "torch>=2.1",
        "numpy>=1.24",
        "scipy>=1.10",
        "soundfile>=0.12",
        "pydantic>=2.5.2",
        "pyyaml>=6.0.1",
        "python-dotenv>=1.0.0",
    ],
    extras_require={
        "test": ["pytest>=7.4"],
    },
    python_requires=">=3.9",
    entry_points={
        "console_scripts": [
            "advsr=advsr.__main__:main",
        ],
    },
)
