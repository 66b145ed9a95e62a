import numpy as np
import pytest

from logodet.image import Image

# four well separated flat colors for quadrant-style fixtures
QUAD_COLORS = [(255, 0, 0), (0, 255, 0), (0, 0, 255), (255, 255, 255)]


def make_image(arr):
    return Image(np.asarray(arr, dtype=np.uint8))


def constant_image(w, h, color):
    arr = np.empty((h, w, 3), dtype=np.uint8)
    arr[:, :] = color
    return Image(arr)


def half_split_image(w=4, h=4, left=(0, 0, 0), right=(255, 255, 255)):
    arr = np.empty((h, w, 3), dtype=np.uint8)
    arr[:, : w // 2] = left
    arr[:, w // 2 :] = right
    return Image(arr)


def quadrant_image(size=8, colors=QUAD_COLORS):
    half = size // 2
    arr = np.empty((size, size, 3), dtype=np.uint8)
    arr[:half, :half] = colors[0]
    arr[:half, half:] = colors[1]
    arr[half:, :half] = colors[2]
    arr[half:, half:] = colors[3]
    return Image(arr)


def noise_image(w=64, h=64, seed=0, low=98, high=158):
    """Gray textured noise of the kind fixture backgrounds use."""
    rng = np.random.default_rng(seed)
    gray = rng.integers(low, high, size=(h, w), dtype=np.int64).astype(np.uint8)
    return Image(np.repeat(gray[:, :, None], 3, axis=2))


@pytest.fixture
def quadrant_fixture():
    return quadrant_image()


@pytest.fixture
def half_split_fixture():
    return half_split_image()
