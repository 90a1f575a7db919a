"""Shared grid/background builders for the test suite."""

import numpy as np
import pytest

import yamabeflow as yf


def unit_grid(size, n=3, length=1.0):
    return yf.GridSpec(n, (size,) * n, (length,) * n)


def periodic_gaussian(grid, center, width, amplitude=1.0):
    """Gaussian bump in the periodic distance to ``center``."""
    coords = grid.meshgrid()
    d2 = np.zeros(grid.shape)
    for x, c, length in zip(coords, center, grid.lengths):
        d = np.abs(x - c)
        d = np.minimum(d, length - d)
        d2 += d * d
    return amplitude * np.exp(-d2 / (2.0 * width * width))


def constant_background(grid, r0=-1.0, f=-1.0):
    return yf.Background(
        grid, yf.ScalarField.constant(grid, r0), yf.ScalarField.constant(grid, f)
    )


@pytest.fixture
def grid8():
    return unit_grid(8)


@pytest.fixture
def bg8(grid8):
    return constant_background(grid8)


def trapped_bump_background(size=16):
    """The small-positive-bump target with negative background curvature.

    sup f on the superlevel set is small enough that the size condition
    holds with the default cutoff construction at h = 1/16.
    """
    grid = unit_grid(size)
    f = yf.ScalarField(
        grid, -1.0 + periodic_gaussian(grid, (0.5, 0.5, 0.5), 0.06, 1.005)
    )
    return yf.Background(grid, yf.ScalarField.constant(grid, -1.0), f)
