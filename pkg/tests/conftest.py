import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def circle_directions(count=10_000):
    """Evenly spaced unit directions over the circle (brute-force net in R^2)."""
    theta = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
    return np.column_stack([np.cos(theta), np.sin(theta)])
