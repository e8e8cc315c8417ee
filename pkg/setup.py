import os
import setuptools

from iterative_binarization import __version__

version = os.environ.get("ALTERNATE_VERSION", __version__)

setuptools.setup(
    version=version,
)
