"""Symmetry group action, transformed profiles, and generator fields."""

import numpy as np
import pytest

from wmlab import geometry, symmetry
from wmlab.symmetry import SymmetryParams


RNG = np.random.default_rng(11)


def rand_theta(d, radius, seed):
    return SymmetryParams.random(d, radius, np.random.default_rng(seed))


# ---------------------------------------------------------------------------
# parameter container

@pytest.mark.parametrize("d,p", [(3, 9), (4, 14), (5, 20)])
def test_parameter_count(d, p):
    assert symmetry.p_of_d(d) == p == d * (d + 3) // 2


def test_flat_roundtrip():
    th = rand_theta(4, 0.05, 1)
    v = th.to_flat()
    assert v.shape == (symmetry.p_of_d(4),)
    th2 = SymmetryParams.from_flat(v, 4)
    assert np.allclose(th2.to_flat(), v)
    assert abs(th.norm() - np.linalg.norm(v)) < 1e-15


def test_json_roundtrip():
    th = rand_theta(3, 0.05, 2)
    th2 = SymmetryParams.from_json_dict(th.to_json_dict())
    assert np.allclose(th.to_flat(), th2.to_flat())


# ---------------------------------------------------------------------------
# group elements

@pytest.mark.parametrize("d", [3, 4])
def test_group_element_structure(d):
    th = rand_theta(d, 0.2, 3)
    R, L, Rc = symmetry.group_elements(th)
    assert np.allclose(R.T @ R, np.eye(d), atol=1e-14)          # rotation
    assert np.allclose(Rc.T @ Rc, np.eye(d + 1), atol=1e-14)    # target rotation
    eta = geometry.minkowski_eta(d)
    assert np.allclose(L.T @ eta @ L, eta, atol=1e-13)           # Lorentz
    assert abs(np.linalg.det(L) - 1.0) < 1e-12


def test_zero_parameters_give_identity():
    R, L, Rc = symmetry.group_elements(SymmetryParams.zero(3))
    assert np.allclose(R, np.eye(3))
    assert np.allclose(L, np.eye(4))
    assert np.allclose(Rc, np.eye(4))


# ---------------------------------------------------------------------------
# transformed solutions and profiles

def test_u_theta_sphere_valued_and_reduces_to_u_star():
    d = 3
    th = rand_theta(d, 0.05, 4)
    for _ in range(20):
        t = RNG.uniform(0.0, 0.3)
        x = RNG.uniform(-0.3, 0.3, d)
        y = symmetry.u_theta(t, x, 1.0, np.zeros(d), th, d)
        assert abs(y @ y - 1.0) < 1e-13
        y0 = symmetry.u_theta(t, x, 1.0, np.zeros(d), SymmetryParams.zero(d), d)
        assert np.allclose(y0, geometry.u_star(t, x, d), atol=1e-13)


def test_v_theta_zero_is_straight_profile():
    d = 4
    th = SymmetryParams.zero(d)
    xi = RNG.uniform(-1.0, 1.0, (50, d))
    assert np.allclose(symmetry.v_theta(xi, th), xi / np.sqrt(d - 2.0),
                       atol=1e-14)


def test_v_theta_matches_u_theta_chart():
    d = 3
    th = rand_theta(d, 0.05, 5)
    xi = RNG.uniform(-1.0, 1.0, (20, d))
    v = symmetry.v_theta(xi, th)
    for i in range(len(xi)):
        y = symmetry.u_theta(0.0, xi[i], 1.0, np.zeros(d), th, d)
        assert np.allclose(v[i], geometry.stereo(y), atol=1e-13)


def test_v_theta_jacobian_matches_finite_differences():
    d = 3
    th = rand_theta(d, 0.05, 6)
    xi = RNG.uniform(-0.8, 0.8, (10, d))
    Dv = symmetry.v_theta_jacobian(xi, th)
    h = 1e-6
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        fd = (symmetry.v_theta(xi + e, th) - symmetry.v_theta(xi - e, th)) \
            / (2.0 * h)
        assert np.max(np.abs(Dv[:, :, j] - fd)) < 1e-8


def test_validate_theta_radius():
    d = 3
    m = symmetry.validate_theta_radius(rand_theta(d, 0.05, 7))
    assert m > 0.5
    with pytest.raises(ValueError):
        symmetry.validate_theta_radius(rand_theta(d, 10.0, 8))


# ---------------------------------------------------------------------------
# parameter-derivative fields

def test_parameter_modes_count_and_labels():
    d = 3
    th = SymmetryParams.zero(d)
    modes, labels = symmetry.parameter_modes(th)
    assert len(modes) == symmetry.p_of_d(d) + d + 1
    assert labels[0] == ("param-T", None)
    assert [lab[0] for lab in labels[1:1 + d]] == ["param-X"] * d
    assert all(lab[0] == "param-Theta" for lab in labels[1 + d:])


def test_param_T_mode_values():
    d = 3
    modes, _ = symmetry.parameter_modes(SymmetryParams.zero(d))
    pts = RNG.uniform(-1.0, 1.0, (30, d))
    s = 1.0 / np.sqrt(d - 2.0)
    assert np.allclose(modes[0].f1.ev(pts), s * pts, atol=1e-14)
    assert np.allclose(modes[0].f2.ev(pts), 2.0 * s * pts, atol=1e-14)


def test_param_theta_modes_are_theta_derivatives():
    """f^0_a matches a central difference of Theta -> v_0^{1,0} - v_Theta."""
    d = 3
    th = SymmetryParams.zero(d)
    modes, labels = symmetry.parameter_modes(th)
    pts = RNG.uniform(-0.7, 0.7, (12, d))
    h = 1e-5
    p = symmetry.p_of_d(d)
    for a in range(0, p, 3):  # spot-check a third of the directions
        e = np.zeros(p)
        e[a] = h
        vp = symmetry.v_theta(pts, SymmetryParams.from_flat(e, d))
        vm = symmetry.v_theta(pts, SymmetryParams.from_flat(-e, d))
        fd = -(vp - vm) / (2.0 * h)  # d/dTheta^a of (v_0 - v_Theta)
        mode = modes[1 + d + a]
        assert np.max(np.abs(mode.f1.ev(pts) - fd)) < 1e-6
