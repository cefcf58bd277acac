import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wildprep.imaging import RasterImage

settings.register_profile(
    "deterministic",
    derandomize=True,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
    deadline=None,
)
settings.load_profile("deterministic")


def random_image(rng: np.random.Generator, width: int, height: int) -> RasterImage:
    return RasterImage(rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
