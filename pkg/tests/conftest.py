"""Shared fixtures and independent oracles for the test suite."""

import numpy as np
import pytest
from scipy import integrate

from kuramoto_damping.distributions import Cauchy, Gaussian, bi_cauchy


@pytest.fixture
def standard_cauchy():
    return Cauchy(1.0)


@pytest.fixture
def standard_gaussian():
    return Gaussian(1.0)


@pytest.fixture
def two_bump():
    return bi_cauchy(1.0, 2.0)


def fourier_oracle(dist, t):
    """Independent Fourier-transform evaluation.

    Each component is even about its center, so the center phase factors out
    exactly and the centered density is integrated with the semi-infinite
    Fourier method (QUADPACK QAWF).  Accurate to ~1e-10, independent of the
    closed forms under test.
    """
    total = 0j
    for w, comp in dist._components():
        center, scale, _ = comp.location_hints()
        centered = type(comp)(scale, 0.0)
        if t == 0:
            val = 1.0
        else:
            val = 2.0 * integrate.quad(
                centered.density, 0, np.inf, weight="cos", wvar=t, limit=600
            )[0]
        total += w * np.exp(-1j * t * center) * val
    return total


def dense_winding_oracle(values):
    """Winding number of a closed curve by unwrapped-angle accumulation.

    ``values`` must trace the closed path (first point repeated at the end is
    not required; closure through the last-to-first chord is implied).
    """
    ang = np.unwrap(np.angle(values))
    total = ang[-1] - ang[0]
    total += np.angle(values[0] / values[-1])
    return int(round(total / (2 * np.pi)))
