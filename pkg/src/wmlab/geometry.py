"""Sphere target, stereographic chart, the explicit self-similar solution, and
pointwise wave-map residual evaluation.

Conventions: the target is the round unit sphere S^d in R^{d+1}.  Points on the
sphere are (d+1)-vectors y with |y| = 1; chart points are d-vectors z obtained by
stereographic projection from the south pole,

    Psi(y~, y^{d+1}) = y~ / (1 + y^{d+1}),

with inverse Psi^{-1}(z) = (2z, 1-|z|^2) / (1+|z|^2).

The Minkowski signature convention is (-,+,...,+): raising the time index flips
the sign, d^0 = -d_0, and d^j = d_j for spatial indices.  This is encoded once in
`minkowski_eta` and used by the residual evaluator.
"""

import numpy as np

EPS_POLE = 1e-6  # guard distance from the south pole for the chart


def minkowski_eta(d):
    """Minkowski form diag(-1, 1, ..., 1) on R^{1,d}."""
    eta = np.eye(d + 1)
    eta[0, 0] = -1.0
    return eta


def _check_dim(d):
    if d < 3:
        raise ValueError("dimension must satisfy d >= 3")


def v_star(xi, d):
    """Self-similar blowup profile V_*(xi) on the sphere.

    V_*(xi) = (2 sqrt(d-2) xi, d-2-|xi|^2) / (d-2+|xi|^2).

    xi may be a single d-vector or an array of shape (..., d); the output has
    shape (..., d+1).
    """
    _check_dim(d)
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != d:
        raise ValueError("xi must have %d components" % d)
    r2 = np.sum(xi**2, axis=-1, keepdims=True)
    denom = (d - 2) + r2
    head = 2.0 * np.sqrt(d - 2.0) * xi / denom
    tail = ((d - 2) - r2) / denom
    return np.concatenate([head, tail], axis=-1)


def u_star(t, x, d):
    """Blowup solution U_*(t,x) = V_*(x/(1-t)); singular exactly at t = 1."""
    _check_dim(d)
    t = float(t)
    if t == 1.0:
        raise ValueError("u_star is singular at t = 1")
    x = np.asarray(x, dtype=float)
    return v_star(x / (1.0 - t), d)


def stereo(y):
    """Stereographic projection from the south pole: (y~, y^{d+1}) -> y~/(1+y^{d+1})."""
    y = np.asarray(y, dtype=float)
    last = y[..., -1:]
    if np.any(last <= -1.0 + EPS_POLE):
        raise ValueError("point too close to the south pole for the chart")
    return y[..., :-1] / (1.0 + last)


def stereo_inv(z):
    """Inverse chart: z -> (2z, 1-|z|^2) / (1+|z|^2), a point on the sphere."""
    z = np.asarray(z, dtype=float)
    r2 = np.sum(z**2, axis=-1, keepdims=True)
    denom = 1.0 + r2
    return np.concatenate([2.0 * z / denom, (1.0 - r2) / denom], axis=-1)


def christoffel(z):
    """Christoffel symbols of the pulled-back round metric in the chart.

    Gamma^n_ij(z) = -(2/(1+|z|^2)) (z_i delta_j^n + z_j delta_i^n - z^n delta_ij).

    Returns an array of shape (..., d, d, d) indexed [..., n, i, j]; symmetric
    in (i, j).  Supports real or complex z (the analytic continuation is used by
    the operator module on complex fields).
    """
    z = np.asarray(z)
    d = z.shape[-1]
    pref = -2.0 / (1.0 + np.sum(z**2, axis=-1))  # (...,)
    eye = np.eye(d)
    zi = z[..., None, :, None]            # z_i at slot i
    zj = z[..., None, None, :]            # z_j at slot j
    zn = z[..., :, None, None]            # z^n at slot n
    # delta_j^n with axes (n, j), delta_i^n with axes (n, i), delta_ij with (i, j)
    shape_ones = (1,) * (z.ndim - 1)
    d_nj = eye.reshape(shape_ones + (d, 1, d))
    d_ni = eye.reshape(shape_ones + (d, d, 1))
    d_ij = eye.reshape(shape_ones + (1, d, d))
    gamma = zi * d_nj + zj * d_ni - zn * d_ij
    return pref[..., None, None, None] * gamma


def wavemap_residual(U, t, x, h, d):
    """Second-order centered finite-difference residual of the wave-map equation.

    For a sphere-valued map U(t, x) the residual is

        d^mu d_mu U + (d^mu U . d_mu U) U
        = -d_t^2 U + Lap U + (-|d_t U|^2 + sum_j |d_j U|^2) U,

    evaluated at (t, x) with step h.  O(h^2) for smooth exact solutions.

    U: callable (t, x) -> (d+1)-vector.
    """
    _check_dim(d)
    x = np.asarray(x, dtype=float)
    u0 = np.asarray(U(t, x), dtype=float)

    # time derivatives
    up = np.asarray(U(t + h, x), dtype=float)
    um = np.asarray(U(t - h, x), dtype=float)
    ut = (up - um) / (2.0 * h)
    utt = (up - 2.0 * u0 + um) / h**2

    lap = np.zeros_like(u0)
    grad_sq = 0.0
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        upj = np.asarray(U(t, x + e), dtype=float)
        umj = np.asarray(U(t, x - e), dtype=float)
        lap += (upj - 2.0 * u0 + umj) / h**2
        uj = (upj - umj) / (2.0 * h)
        grad_sq += np.dot(uj, uj)

    kinetic = -np.dot(ut, ut) + grad_sq  # d^mu U . d_mu U
    return -utt + lap + kinetic * u0
