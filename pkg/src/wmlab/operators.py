"""The free generator, the perturbation potentials, the angular operator K, the
nonlinearity, and the Taylor identities.

Two evaluation layers share the same formulas:

* a jet layer acting on exact-derivative fields (`fields.PairJet`), used by the
  norm/inequality sampling where stencil error would contaminate the estimates;
* a grid layer acting on sampled fields over a `cubegrid.CubeGrid`, used by the
  static-solution check and the evolution.

First-order system conventions.  The state is a pair f = (f1, f2) of
d-component fields on the ball.  The free generator is

    Ltilde (f1, f2) = ( -Lambda f1 + f2,  Lap f1 - Lambda f2 - f2 ),

the quadratic form entering the full system is

    F^n(f1, Df1, f2) = Gamma^n_ij(f1) (f2^i f2^j - d^m f1^i d_m f1^j),

and the state-space nonlinearity is bold-F(f) = (0, -F(f1, Df1, f2)).  The
contraction with the Christoffel symbol is evaluated in closed form: for
symmetric B_ij,

    Gamma^n_ij(z) B_ij = pref(z) * (2 (B z)^n - z^n tr B),   pref = -2/(1+|z|^2).
"""

import numpy as np

from .fields import (AffineCoeff, CoeffJet, KJet, LambdaJet, LaplacianJet,
                     PairJet, PolyCoeff, RadialReciprocal, SumJet, ZeroJet,
                     _unit)
from . import symmetry


# ---------------------------------------------------------------------------
# jet layer

def free_generator_jet(f):
    """Ltilde on a PairJet."""
    g1 = SumJet([LambdaJet(f.f1), f.f2], [-1.0, 1.0])
    g2 = SumJet([LaplacianJet(f.f1), LambdaJet(f.f2), f.f2], [1.0, -1.0, -1.0])
    return PairJet(g1, g2)


def lprime0_jet(f, d):
    """The explicit perturbation at Theta = 0 on a PairJet:

    first component 0; second component
        2(d-2-|xi|^2)/(d-2+|xi|^2) f1 + 4/(d-2+|xi|^2) (|xi|^2 f2 - Lambda f1 + K f1).
    """
    phi = RadialReciprocal(d, d - 2.0)
    c1 = AffineCoeff(-2.0, 4.0 * (d - 2.0), phi)  # 2(d-2-r^2)/(d-2+r^2)
    c2 = AffineCoeff(0.0, 4.0, phi)               # 4/(d-2+r^2)
    r2 = PolyCoeff(d, {_unit(d, j, 2): 1.0 for j in range(d)})
    inner = SumJet([CoeffJet(r2, f.f2), LambdaJet(f.f1), KJet(f.f1)],
                   [1.0, -1.0, 1.0])
    g2 = SumJet([CoeffJet(c1, f.f1), CoeffJet(c2, inner)], [1.0, 1.0])
    return PairJet(ZeroJet(d, d), g2)


# ---------------------------------------------------------------------------
# pointwise value layer (shared by jets-at-points and grid arrays)

def _gamma_contract_sym(z, Bz, trB):
    """Gamma^n_ij(z) B_ij for symmetric B given B z and tr B."""
    pref = -2.0 / (1.0 + np.sum(z * z, axis=-1))
    return pref[..., None] * (2.0 * Bz - z * trB[..., None])


def nonlinearity_F_values(f1, df1, f2):
    """Pointwise F^n = Gamma^n_ij(f1)(f2^i f2^j - d^m f1^i d_m f1^j).

    f1, f2: (..., dc); df1: (..., dc, d) indexed [component, direction].
    """
    s2 = np.sum(f2 * f1, axis=-1)                    # f2 . z
    Bz = f2 * s2[..., None]
    for m in range(df1.shape[-1]):
        g = df1[..., m]
        Bz = Bz - g * np.sum(g * f1, axis=-1)[..., None]
    trB = np.sum(f2 * f2, axis=-1) - np.sum(df1 * df1, axis=(-2, -1))
    return _gamma_contract_sym(f1, Bz, trB)


def potentials_values(theta, pts):
    """Closed-form Frechet potentials of the perturbation L'_Theta at points.

    Returns (V, Vi, W): V, W of shape (npts, dc, dc) and Vi of shape
    (npts, d, dc, dc), such that the second component of L'_Theta f is

        (L' f)_2^n = V[n,j] f1^j + Vi[i,n,j] d_i f1^j + W[n,j] f2^j.

    Derived by differentiating F at (v_Theta, D v_Theta, Lambda v_Theta):
    with v = v_Theta, w = Lambda v, B_ij = w^i w^j - d^m v^i d_m v^j,
        W[n,j]     = -2 Gamma^n_ij(v) w^i
        Vi[i,n,j]  = +2 Gamma^n_pj(v) d_i v^p
        V[n,j]     = -(d Gamma^n_pq / d z_j)(v) B_pq.
    """
    d = theta.d
    pts = np.asarray(pts, dtype=float)
    npts = pts.shape[0]
    v = symmetry.v_theta(pts, theta)
    Dv = symmetry.v_theta_jacobian(pts, theta)       # (npts, comp, dir)
    w = np.einsum("pcd,pd->pc", Dv, pts)             # Lambda v
    one_r2 = 1.0 + np.sum(v * v, axis=1)
    pref = -2.0 / one_r2
    eye = np.eye(d)

    vw = np.sum(v * w, axis=1)
    W = -2.0 * pref[:, None, None] * (
        vw[:, None, None] * eye[None]
        + v[:, None, :] * w[:, :, None]              # v_j w_n at [n, j]
        - v[:, :, None] * w[:, None, :])             # v_n w_j
    Vi = np.empty((npts, d, d, d))
    for i in range(d):
        dv = Dv[:, :, i]
        vdv = np.sum(v * dv, axis=1)
        Vi[:, i] = 2.0 * pref[:, None, None] * (
            vdv[:, None, None] * eye[None]
            + v[:, None, :] * dv[:, :, None]
            - v[:, :, None] * dv[:, None, :])
    # B at the profile
    Bz = w * np.sum(w * v, axis=1)[:, None]
    B = w[:, :, None] * w[:, None, :]
    for m in range(d):
        g = Dv[:, :, m]
        Bz = Bz - g * np.sum(g * v, axis=1)[:, None]
        B = B - g[:, :, None] * g[:, None, :]
    trB = np.einsum("pii->p", B)
    Q = 2.0 * Bz - v * trB[:, None]                  # S . B contraction
    V = -(4.0 * v[:, None, :] / (one_r2**2)[:, None, None] * Q[:, :, None]
          + pref[:, None, None] * (2.0 * B - trB[:, None, None] * eye[None]))
    return V, Vi, W


class PotentialSet:
    """Immutable container for the perturbation potentials at fixed Theta."""

    def __init__(self, theta):
        self.theta = theta
        self.d = theta.d

    def at(self, pts):
        return potentials_values(self.theta, pts)


def linearize_potentials(theta):
    symmetry.validate_theta_radius(theta)
    return PotentialSet(theta)


def lprime_values(theta, pts, f1, df1, f2, pots=None):
    """Second component of L'_Theta f from pointwise data (first component 0)."""
    V, Vi, W = potentials_values(theta, pts) if pots is None else pots
    out = np.einsum("pnj,pj->pn", V, f1) + np.einsum("pnj,pj->pn", W, f2)
    out = out + np.einsum("pinj,pji->pn", Vi, df1)
    return out


def nonlinearity_N_values(theta, pts, f1, df1, f2, pots=None):
    """Second component of N_Theta(f) = F(v+f) - F(v) - F'(v) f (as bold-F, so
    the sign convention matches lprime_values: returns the +(...) that enters
    the state equation's second slot along with lprime)."""
    d = theta.d
    pts = np.asarray(pts, dtype=float)
    v = symmetry.v_theta(pts, theta)
    Dv = symmetry.v_theta_jacobian(pts, theta)
    w = np.einsum("pcd,pd->pc", Dv, pts)
    F_full = nonlinearity_F_values(v + f1, Dv + df1, w + f2)
    F_base = nonlinearity_F_values(v, Dv, w)
    lin = lprime_values(theta, pts, f1, df1, f2, pots=pots)
    # bold-F has a minus sign; L' = (0, lprime_values) already absorbs it.
    return -(F_full - F_base) - lin


# ---------------------------------------------------------------------------
# grid layer

class GridPair:
    """CylinderField on a CubeGrid: arrays f1, f2 of shape grid + (d,)."""

    def __init__(self, grid, f1, f2):
        self.grid = grid
        self.f1 = f1
        self.f2 = f2

    @classmethod
    def zero(cls, grid):
        shp = (grid.n,) * grid.d + (grid.d,)
        return cls(grid, np.zeros(shp), np.zeros(shp))

    @classmethod
    def from_jet(cls, grid, pair):
        pts = grid.points()
        shp = (grid.n,) * grid.d + (grid.d,)
        f1 = np.real(pair.f1.ev(pts)).reshape(shp)
        f2 = np.real(pair.f2.ev(pts)).reshape(shp)
        return cls(grid, f1, f2)

    def copy(self):
        return GridPair(self.grid, self.f1.copy(), self.f2.copy())


def apply_free_generator(gp):
    """Stencil evaluation of Ltilde on a GridPair."""
    g = gp.grid
    grad1 = g.gradient(gp.f1)
    lam1 = np.einsum("...md,...d->...m", grad1, g.xi)
    lam2 = g.scaling_vector_field(gp.f2)
    return GridPair(g, -lam1 + gp.f2, g.laplacian(gp.f1) - lam2 - gp.f2)


def apply_K(grid, f):
    """(K f)^n = xi^n d_j f^j - xi_j d^n f^j on grid samples f of shape grid+(d,)."""
    grad = grid.gradient(f)                       # [..., comp, dir]
    div = np.einsum("...jj->...", grad)
    term1 = grid.xi * div[..., None]
    # xi_j d^n f^j = sum_j xi_j (d/dxi_n) f^j -> grad[..., j, n] xi_j
    term2 = np.einsum("...jn,...j->...n", grad, grid.xi)
    return term1 - term2


def apply_Lprime0(gp):
    """Grid version of the explicit Theta = 0 perturbation."""
    g = gp.grid
    d = g.d
    r2 = g.r2
    c1 = 2.0 * ((d - 2.0) - r2) / ((d - 2.0) + r2)
    c2 = 4.0 / ((d - 2.0) + r2)
    lam1 = g.scaling_vector_field(gp.f1)
    k1 = apply_K(g, gp.f1)
    second = c1[..., None] * gp.f1 + c2[..., None] * (
        r2[..., None] * gp.f2 - lam1 + k1)
    return GridPair(g, np.zeros_like(gp.f1), second)


def full_rhs_grid(gp):
    """G(f) = Ltilde f + bold-F(f) on the grid (the static field equation's
    right-hand side; the profile pair is a zero of G)."""
    g = gp.grid
    grad1 = g.gradient(gp.f1)
    lam1 = np.einsum("...md,...d->...m", grad1, g.xi)
    lam2 = g.scaling_vector_field(gp.f2)
    first = -lam1 + gp.f2
    second = g.laplacian(gp.f1) - lam2 - gp.f2
    df1 = grad1
    F = nonlinearity_F_values(gp.f1, df1, gp.f2)
    return GridPair(g, first, second - F)


def static_residual_report(theta, grid):
    """Sup norm over the ball of Ltilde v_Theta + bold-F(v_Theta) on the grid,
    against an a-priori stencil truncation estimate.

    The continuum residual is identically zero, so the grid value is pure
    stencil error.  The estimate uses the centered 4th-order truncation
    constants e_D1 <= (h^4/30) max|f^(5)|, e_D2 <= (h^4/90) max|f^(6)|, with
    the high derivatives themselves estimated by repeated stencil application
    to the exact profile samples, and a generous Lipschitz factor for the
    propagation of the gradient error through the nonlinearity.
    """
    pair = GridPair.from_jet(grid, symmetry.vtheta_pair(theta))
    res = full_rhs_grid(pair)
    mask = grid.ball_mask
    sup = max(float(np.max(np.abs(res.f1[mask]))),
              float(np.max(np.abs(res.f2[mask]))))
    d = grid.d
    h = grid.h

    def _sup_deriv(u, order):
        best = 0.0
        for ax in range(d):
            v = u
            for _ in range(order // 2):
                v = grid.diff(v, ax, 2)
            if order % 2:
                v = grid.diff(v, ax)
            best = max(best, float(np.max(np.abs(v[mask]))))
        return best

    m5_1 = _sup_deriv(pair.f1, 5)
    m5_2 = _sup_deriv(pair.f2, 5)
    m6_1 = _sup_deriv(pair.f1, 6)
    lip_F = 4.0   # |dF/d(grad)| scale at the profile (chart values are O(1))
    estimate = (h**4 / 30.0) * ((1.0 + lip_F) * d * m5_1 + d * m5_2) \
        + (h**4 / 90.0) * d * m6_1
    return {"sup_residual": sup, "stencil_estimate": float(estimate),
            "ratio": sup / estimate if estimate > 0 else np.inf}


# ---------------------------------------------------------------------------
# Taylor identities

def _gl_nodes(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def taylor_identity_check(F, y0, y, y1, y2, dF=None, d2F=None, n_quad=20):
    """Defects of the two integral identities for N(y) = F(y0+y) - F(y0) - F'(y0) y.

    quadratic identity:  N(y) = y^a y^b int_0^1 (1-t) dadb F(y0 + t y) dt
    difference identity: N(y1) - N(y2) =
        (y1 - y2)^a int_0^1 int_0^1 (t y1^b + (1-t) y2^b)
                                dadb F(y0 + s(y2 + t(y1 - y2))) ds dt

    F maps R^m -> R^kk; dF(x) has shape (kk, m), d2F(x) shape (kk, m, m).
    If dF/d2F are omitted they are computed by Richardson finite differences
    (defects then bottom out near 1e-9 instead of quadrature accuracy).
    """
    y0 = np.asarray(y0, dtype=float)
    m = y0.shape[0]

    if dF is None:
        def dF(x, _F=F, _h=1e-5):
            cols = []
            for j in range(m):
                e = np.zeros(m)
                e[j] = 1.0
                d1 = (np.asarray(_F(x + _h * e)) - np.asarray(_F(x - _h * e))) / (2 * _h)
                d2 = (np.asarray(_F(x + _h / 2 * e)) - np.asarray(_F(x - _h / 2 * e))) / _h
                cols.append((4 * d2 - d1) / 3.0)
            return np.stack(cols, axis=-1)
    if d2F is None:
        def d2F(x, _dF=dF, _h=1e-4):
            cols = []
            for j in range(m):
                e = np.zeros(m)
                e[j] = 1.0
                d1 = (_dF(x + _h * e) - _dF(x - _h * e)) / (2 * _h)
                d2 = (_dF(x + _h / 2 * e) - _dF(x - _h / 2 * e)) / _h
                cols.append((4 * d2 - d1) / 3.0)
            return np.stack(cols, axis=-1)

    def N(z):
        return np.asarray(F(y0 + z)) - np.asarray(F(y0)) - dF(y0) @ z

    t, wt = _gl_nodes(n_quad)

    y = np.asarray(y, dtype=float)
    acc = 0.0
    for ti, wi in zip(t, wt):
        H = d2F(y0 + ti * y)
        acc = acc + wi * (1.0 - ti) * np.einsum("kab,a,b->k", H, y, y)
    defect_quadratic = float(np.max(np.abs(N(y) - acc)))

    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    s, ws = _gl_nodes(n_quad)
    acc = 0.0
    dy = y1 - y2
    for ti, wi in zip(t, wt):
        yt = y2 + ti * dy
        for si, wsi in zip(s, ws):
            H = d2F(y0 + si * yt)
            acc = acc + wi * wsi * np.einsum("kab,a,b->k", H, dy, yt)
    defect_difference = float(np.max(np.abs(N(y1) - N(y2) - acc)))
    return defect_quadratic, defect_difference
