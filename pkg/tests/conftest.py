import numpy as np
import pytest

from stereomatch.image_io import GrayImage


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_image(rng, h, w):
    """8-bit quantised random image, like anything loaded from a PGM."""
    return GrayImage(rng.integers(0, 256, size=(h, w)) / 255.0)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
