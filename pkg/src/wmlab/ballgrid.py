"""Quadrature on the unit ball and its boundary sphere.

Product rule: Gauss-Legendre in the radius against the weight r^{d-1}, tensor
Gauss-Jacobi (Gegenbauer weight) in the polar angles, uniform trapezoid in the
azimuth.  All weights are positive, so the discrete inner products stay
positive-definite.  The boundary sphere reuses the angular grid at r = 1.
"""

import numpy as np
from scipy.special import gamma as gamma_fn, roots_jacobi


def sphere_area(d):
    """sigma(S^{d-1}) = 2 pi^{d/2} / Gamma(d/2)."""
    return 2.0 * np.pi ** (d / 2.0) / gamma_fn(d / 2.0)


def ball_volume(d):
    return sphere_area(d) / d


def _angular_grid(d, n):
    """Nodes (npts, d) on S^{d-1} and weights summing to sigma(S^{d-1})."""
    # polar angles theta_1..theta_{d-2} with weight sin^{d-1-j}, azimuth phi
    node_lists = []
    weight_lists = []
    for j in range(1, d - 1):
        a = (d - 2 - j) / 2.0
        c, w = roots_jacobi(n, a, a)
        node_lists.append(c)
        weight_lists.append(w)
    n_phi = max(4, 2 * n)
    phi = np.arange(n_phi) * (2.0 * np.pi / n_phi)
    mesh_nodes = np.meshgrid(*node_lists, phi, indexing="ij") if node_lists \
        else [phi]
    mesh_w = np.meshgrid(*weight_lists, np.full(n_phi, 2.0 * np.pi / n_phi),
                         indexing="ij") if weight_lists \
        else [np.full(n_phi, 2.0 * np.pi / n_phi)]
    shapes = mesh_nodes[0].shape
    npts = int(np.prod(shapes))
    omega = np.empty((npts, d))
    sin_prod = np.ones(npts)
    for j in range(d - 2):
        c = mesh_nodes[j].reshape(-1)
        omega[:, j] = sin_prod * c
        sin_prod = sin_prod * np.sqrt(np.maximum(0.0, 1.0 - c**2))
    ph = mesh_nodes[-1].reshape(-1)
    omega[:, d - 2] = sin_prod * np.cos(ph)
    omega[:, d - 1] = sin_prod * np.sin(ph)
    w = np.ones(npts)
    for mw in mesh_w:
        w = w * mw.reshape(-1)
    return omega, w


class BallGrid:
    """Interior quadrature nodes/weights on B^d plus boundary sphere nodes."""

    def __init__(self, d, n):
        if d < 3:
            raise ValueError("d must be >= 3")
        self.d = d
        self.n = n
        x, wr = np.polynomial.legendre.leggauss(n)
        r = 0.5 * (x + 1.0)
        wr = 0.5 * wr * r ** (d - 1)
        omega, wa = _angular_grid(d, n)
        self.nodes = (r[:, None, None] * omega[None, :, :]).reshape(-1, d)
        self.weights = (wr[:, None] * wa[None, :]).reshape(-1)
        self.bnodes = omega
        self.bweights = wa

    def refine(self, factor=2):
        return BallGrid(self.d, self.n * factor)

    def integrate(self, vals):
        """Integrate pointwise values (npts,) or (npts, m) over the ball."""
        vals = np.asarray(vals)
        if vals.ndim == 1:
            return float(np.real(np.sum(self.weights * vals))) \
                if np.isrealobj(vals) else np.sum(self.weights * vals)
        return np.sum(self.weights[:, None] * vals, axis=0)

    def integrate_boundary(self, vals):
        vals = np.asarray(vals)
        if vals.ndim == 1:
            return np.sum(self.bweights * vals)
        return np.sum(self.bweights[:, None] * vals, axis=0)
