import os
import sys

# before any toolkit import: keep test runs out of the rotating log file
os.environ.setdefault("FNC_LOG_DIR", "none")
os.environ.setdefault("FNC_LOG_LEVEL", "WARNING")

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "src", "python"))

import numpy as np
import pytest

from models.binary_image import BinaryImage
from services import ifs_service, series_model_service
from utils.logger import setup_logger

setup_logger("WARNING")

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def sierpinski():
    return ifs_service.sierpinski_system()


@pytest.fixture(scope="session")
def sierpinski_image_64(sierpinski):
    return ifs_service.render_attractor(sierpinski, 64, 64)


@pytest.fixture(scope="session")
def logistic_values():
    return series_model_service.logistic_orbit(2000)


@pytest.fixture
def random_image(rng):
    def make(width=13, height=9, density=0.5):
        return BinaryImage(rng.random((height, width)) < density)
    return make


@pytest.fixture
def data_dir():
    return DATA_DIR
