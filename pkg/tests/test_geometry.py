"""Sphere chart, profile, and finite-difference residual checks."""

import numpy as np
import pytest

from wmlab import geometry


RNG = np.random.default_rng(7)


# ---------------------------------------------------------------------------
# chart round trips and identities

@pytest.mark.parametrize("d", [3, 4, 5])
def test_stereo_roundtrip(d):
    z = RNG.standard_normal((200, d))
    y = geometry.stereo_inv(z)
    assert np.allclose(np.sum(y**2, axis=-1), 1.0, atol=1e-14)
    assert np.allclose(geometry.stereo(y), z, atol=1e-12)


@pytest.mark.parametrize("d", [3, 4, 5])
def test_vstar_on_sphere_and_chart_identity(d):
    xi = 3.0 * RNG.standard_normal((500, d))
    V = geometry.v_star(xi, d)
    assert np.allclose(np.sum(V**2, axis=-1), 1.0, atol=1e-13)
    # the profile is the chart image of xi/sqrt(d-2)
    assert np.allclose(geometry.stereo(V), xi / np.sqrt(d - 2.0), atol=1e-12)


def test_vstar_at_origin_is_north_pole():
    V = geometry.v_star(np.zeros(3), 3)
    assert np.allclose(V, [0.0, 0.0, 0.0, 1.0], atol=1e-15)


def test_stereo_rejects_south_pole():
    y = np.zeros(4)
    y[-1] = -1.0
    with pytest.raises(ValueError):
        geometry.stereo(y)


def test_dimension_guard():
    with pytest.raises(ValueError):
        geometry.v_star(np.zeros(2), 2)


# ---------------------------------------------------------------------------
# Christoffel symbols

@pytest.mark.parametrize("d", [3, 4])
def test_christoffel_symmetry_and_value(d):
    z = RNG.standard_normal((20, d))
    G = geometry.christoffel(z)
    assert G.shape == (20, d, d, d)
    assert np.allclose(G, np.swapaxes(G, -1, -2), atol=1e-15)
    # closed form at a single point
    z0 = z[0]
    pref = -2.0 / (1.0 + z0 @ z0)
    for n in range(d):
        for i in range(d):
            for j in range(d):
                want = pref * (z0[i] * (j == n) + z0[j] * (i == n)
                               - z0[n] * (i == j))
                assert abs(G[0, n, i, j] - want) < 1e-14


def test_christoffel_vanishes_at_origin():
    G = geometry.christoffel(np.zeros(3))
    assert np.max(np.abs(G)) == 0.0


# ---------------------------------------------------------------------------
# wave-map residual of the exact blowup solution

def test_ustar_residual_small_and_second_order():
    d = 3

    def U(t, x):
        return geometry.u_star(t, x, d)

    # interior point, away from the steep-gradient core at x = 0
    x = np.array([0.41, -0.27, 0.15])
    t = 0.05
    res = {h: np.max(np.abs(geometry.wavemap_residual(U, t, x, h, d)))
           for h in (4e-3, 2e-3, 1e-3)}
    assert res[1e-3] <= 1e-5
    order = np.log2(res[2e-3] / res[1e-3])
    assert 1.7 <= order <= 2.3


def test_residual_detects_a_non_solution():
    d = 3

    def U(t, x):
        y = np.array([np.sin(x[0]), np.sin(2.0 * x[1]), 0.3 * t, 2.0])
        return y / np.linalg.norm(y)

    # sphere-valued but not a wave map: residual does not vanish with h
    r = np.max(np.abs(geometry.wavemap_residual(
        U, 0.3, np.array([0.2, 0.1, 0.0]), 1e-3, d)))
    assert r > 1e-2
