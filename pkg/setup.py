import setuptools

setuptools.setup(
    name="ooc-tilechol",
    version="0.1.0",
    description="Out-of-core mixed precision tile Cholesky simulator",
    include_package_data=True,
    zip_safe=True,
    classifiers=[
        "Intended Audience :: Science/Research",
        "Operating System :: OS Independent",
        "Programming Language :: Python",
    ],
    packages=setuptools.find_packages(exclude=["tests", "tests.*"]),
    install_requires=[
        "schematics>=2", "marshmallow>=3", "typing-extensions", "pydantic>=1.8,<2",
        "numpy>=1.20", "scipy>=1.6", "ml_dtypes>=0.2"
    ],
    entry_points={"console_scripts": ["tilechol=tilechol.cli:main"]},
)
