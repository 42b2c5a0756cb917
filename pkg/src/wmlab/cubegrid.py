"""Uniform Cartesian cube grid enclosing the unit ball, with high-order finite
difference stencils.

The cube is [-L, L]^d with L slightly above 1 so that every node of the closed
unit ball has a full centered stencil.  Derivatives use 4th-order centered
stencils in the interior and one-sided 3rd-order stencils on the outermost two
shells of the cube (those shells sit outside the unit ball, so interior
accuracy on the ball is uniformly 4th order).

Grid functions are arrays of shape (n,)*d + (m,) with m the component count.
"""

import math

import numpy as np


def fd_weights(xs, x0, der):
    """Finite-difference weights for derivative order `der` at x0 from nodes xs
    (Taylor-matrix solve; exact for len(xs) nodes)."""
    xs = np.asarray(xs, dtype=float)
    k = len(xs)
    A = np.vander(xs - x0, k, increasing=True).T  # A[i, j] = (xs_j - x0)^i
    b = np.zeros(k)
    b[der] = math.factorial(der)
    return np.linalg.solve(A, b)


def _deriv_matrix(n, h, der):
    """Dense n x n one-dimensional derivative matrix: centered 4th order inside,
    one-sided / biased 3rd order on the two outermost rows each side."""
    D = np.zeros((n, n))
    half = 2
    stencil = np.arange(-half, half + 1)
    w_c = fd_weights(stencil * h, 0.0, der)
    for i in range(half, n - half):
        D[i, i - half:i + half + 1] = w_c
    width = 4 + der  # enough nodes for 3rd-order one-sided stencils
    for i in range(half):
        fwd = np.arange(width) * h            # nodes 0..width-1, point at i
        D[i, :width] = fd_weights(fwd, i * h, der)
        bwd = (np.arange(width) - (width - 1)) * h  # nodes ending at 0
        D[n - 1 - i, n - width:] = fd_weights(bwd, -i * h, der)
    return D


class CubeGrid:
    """Uniform tensor grid on [-L, L]^d."""

    def __init__(self, d, n, L=1.1):
        if n < 8:
            raise ValueError("grid too coarse")
        self.d = d
        self.n = n
        self.L = L
        self.axis = np.linspace(-L, L, n)
        self.h = self.axis[1] - self.axis[0]
        self.D1 = _deriv_matrix(n, self.h, 1)
        self.D2 = _deriv_matrix(n, self.h, 2)
        mesh = np.meshgrid(*([self.axis] * d), indexing="ij")
        self.xi = np.stack(mesh, axis=-1)  # (n,)*d + (d,)
        self.r2 = np.sum(self.xi**2, axis=-1)
        self.ball_mask = self.r2 <= 1.0

    def points(self):
        return self.xi.reshape(-1, self.d)

    def sample(self, func, m=None):
        """Sample a vectorized callable pts(npts, d) -> (npts, m) on the grid."""
        pts = self.points()
        vals = np.asarray(func(pts))
        if vals.ndim == 1:
            vals = vals[:, None]
        return vals.reshape((self.n,) * self.d + (vals.shape[-1],))

    def _apply_axis(self, M, u, axis):
        u = np.moveaxis(u, axis, 0)
        shp = u.shape
        out = (M @ u.reshape(self.n, -1)).reshape(shp)
        return np.moveaxis(out, 0, axis)

    def diff(self, u, axis, order=1):
        """Derivative of a grid function along one axis (order 1 or 2)."""
        M = self.D1 if order == 1 else self.D2
        return self._apply_axis(M, u, axis)

    def gradient(self, u):
        """All first derivatives; returns shape grid + (m, d)."""
        return np.stack([self.diff(u, ax) for ax in range(self.d)], axis=-1)

    def laplacian(self, u):
        out = self.diff(u, 0, 2)
        for ax in range(1, self.d):
            out += self.diff(u, ax, 2)
        return out

    def scaling_vector_field(self, u, grad=None):
        """Lambda u = xi . grad u."""
        if grad is None:
            grad = self.gradient(u)
        return np.einsum("...md,...d->...m", grad, self.xi)

    def interpolator(self, u):
        """Componentwise cubic spline interpolator for a grid function."""
        from scipy.interpolate import RegularGridInterpolator
        return RegularGridInterpolator((self.axis,) * self.d, u, method="cubic",
                                       bounds_error=False, fill_value=None)
