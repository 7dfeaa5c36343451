import math

import numpy as np
import pytest

from warpedg2.geometry import SU3Background, WarpedProfile
from warpedg2.numerics import Grid, quadrature

TWO_PI = 2 * math.pi


@pytest.fixture
def circle256():
    return Grid.circle(256)


@pytest.fixture
def unit_interval():
    return Grid.interval(64, 0.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_smooth(rng, r, modes=3, scale=1.0):
    """Random trigonometric polynomial, periodic on ``[0, 2 pi)``."""
    out = np.full_like(r, rng.uniform(-1, 1) * scale)
    for m in range(1, modes + 1):
        a, b = rng.uniform(-1, 1, 2) * scale / m
        out += a * np.cos(m * r) + b * np.sin(m * r)
    return out


def random_profile(rng, n=256, lam=1.0):
    g = Grid.circle(n)
    r = g.nodes
    G = 1.2 + 0.3 * np.tanh(random_smooth(rng, r))
    h = (2.0 + 0.5 * np.tanh(random_smooth(rng, r))) * rng.choice([-1.0, 1.0])
    winding = TWO_PI * int(rng.integers(-1, 2))
    theta = winding * r / TWO_PI + random_smooth(rng, r)
    return WarpedProfile(g, G, h, theta, SU3Background(lam), winding)


def co_closed_nk_profile(rng, n=256, min_sum=0.2, tries=200):
    """Random co-closed nearly Kaehler profile with ``|alpha + beta| >= min_sum``.

    ``theta - pi/2`` is odd and ``G`` even about ``r = 0``, so
    ``h = h0 - int G cos(theta)`` is periodic and ``gamma`` vanishes.
    """
    from warpedg2.geometry import compute_abc

    g = Grid.circle(n)
    r = g.nodes
    for _ in range(tries):
        e = rng.uniform(-0.15, 0.15, 2)
        d = rng.uniform(-0.15, 0.15, 2)
        theta = math.pi / 2 + e[0] * np.sin(r) + e[1] * np.sin(2 * r)
        G = 1 + d[0] * np.cos(r) + d[1] * np.cos(2 * r)
        h0 = rng.uniform(1.5, 3.0)
        h = h0 - quadrature(G * np.cos(theta), g, 0.0)
        p = WarpedProfile(g, G, h, theta, SU3Background(1.0))
        t = compute_abc(p)
        if float(np.min(np.abs(t.alpha + t.beta))) >= min_sum:
            return p
    raise RuntimeError("no admissible profile found")
