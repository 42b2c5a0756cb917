"""Chart-level operators: free generator, potentials, nonlinearity, stencils."""

import numpy as np
import pytest

from wmlab import geometry, operators, symmetry
from wmlab.cubegrid import CubeGrid
from wmlab.fields import PairJet, PolyJet, TrigJet
from wmlab.operators import GridPair
from wmlab.symmetry import SymmetryParams


RNG = np.random.default_rng(5)


# ---------------------------------------------------------------------------
# nonlinearity values vs the raw Christoffel contraction

def test_F_matches_christoffel_contraction():
    d = 3
    npts = 40
    f1 = RNG.standard_normal((npts, d))
    df1 = RNG.standard_normal((npts, d, d))
    f2 = RNG.standard_normal((npts, d))
    F = operators.nonlinearity_F_values(f1, df1, f2)
    G = geometry.christoffel(f1)  # (npts, n, i, j)
    B = (f2[:, :, None] * f2[:, None, :]
         - np.einsum("pim,pjm->pij", df1, df1))
    want = np.einsum("pnij,pij->pn", G, B)
    assert np.max(np.abs(F - want)) < 1e-12


def test_F_vanishes_at_origin_of_chart():
    d = 3
    f1 = np.zeros((5, d))
    df1 = RNG.standard_normal((5, d, d))
    f2 = np.zeros((5, d))
    assert np.max(np.abs(operators.nonlinearity_F_values(f1, df1, f2))) == 0.0


# ---------------------------------------------------------------------------
# free generator: jet vs stencil

def test_free_generator_jet_matches_grid_stencil():
    d = 3
    g = CubeGrid(d, 32)
    f = PairJet.random_real(d, 3, 1, np.random.default_rng(2))
    gp = GridPair.from_jet(g, f)
    Lg = operators.apply_free_generator(gp)
    Lj = GridPair.from_jet(g, operators.free_generator_jet(f))
    mask = g.ball_mask
    err = max(np.max(np.abs((Lg.f1 - Lj.f1)[mask])),
              np.max(np.abs((Lg.f2 - Lj.f2)[mask])))
    assert err < 1e-4  # 4th-order stencil at n=32


# ---------------------------------------------------------------------------
# the angular operator K

@pytest.mark.parametrize("d", [3, 4, 5])
def test_K_eigenvalues(d):
    g = CubeGrid(d, 16)
    shp = (g.n,) * d + (d,)
    mask = g.ball_mask

    def eig_defect(f, lam):
        Kf = operators.apply_K(g, f)
        return np.max(np.abs((Kf - lam * f)[mask]))

    const = np.broadcast_to(RNG.standard_normal(d), shp).copy()
    assert eig_defect(const, 0.0) < 1e-10

    A = RNG.standard_normal((d, d))
    A = A - A.T
    rot = np.einsum("nj,...j->...n", A, g.xi)
    assert eig_defect(rot, 1.0) < 1e-10

    radial = g.xi.copy()
    assert eig_defect(radial, float(d - 1)) < 1e-10


# ---------------------------------------------------------------------------
# the explicit Theta = 0 linearization

def test_lprime0_jet_matches_grid():
    d = 3
    g = CubeGrid(d, 32)
    f = PairJet.random_real(d, 3, 1, np.random.default_rng(3))
    gp = GridPair.from_jet(g, f)
    Lg = operators.apply_Lprime0(gp)
    Lj = GridPair.from_jet(g, operators.lprime0_jet(f, d))
    mask = g.ball_mask
    assert np.max(np.abs(Lg.f1[mask])) == 0.0
    assert np.max(np.abs((Lg.f2 - Lj.f2)[mask])) < 1e-4


def test_lprime_values_is_the_linearized_nonlinearity():
    """L'_Theta f = d/ds [Ltilde-part-free nonlinearity at v_Theta + s f]."""
    d = 3
    th = SymmetryParams.random(d, 0.05, np.random.default_rng(4))
    pts = RNG.uniform(-0.6, 0.6, (25, d))
    f1 = RNG.standard_normal((25, d))
    df1 = RNG.standard_normal((25, d, d))
    f2 = RNG.standard_normal((25, d))

    v1 = symmetry.v_theta(pts, th)
    Dv = symmetry.v_theta_jacobian(pts, th)
    w = np.einsum("pmd,pd->pm", Dv, pts)  # Lambda v = xi . grad v

    def Ffull(s):
        return operators.nonlinearity_F_values(
            v1 + s * f1, Dv + s * df1, w + s * f2)

    h = 1e-6
    fd = (Ffull(h) - Ffull(-h)) / (2.0 * h)
    lin = operators.lprime_values(th, pts, f1, df1, f2)
    # lprime carries the sign of the state equation's second slot (-bold F)
    assert np.max(np.abs(lin + fd)) < 1e-6


def test_nonlinearity_N_is_quadratically_small():
    d = 3
    th = SymmetryParams.zero(d)
    pts = RNG.uniform(-0.6, 0.6, (25, d))
    f1 = RNG.standard_normal((25, d))
    df1 = RNG.standard_normal((25, d, d))
    f2 = RNG.standard_normal((25, d))
    norms = []
    eps_list = [1e-2, 1e-3, 1e-4]
    for eps in eps_list:
        N = operators.nonlinearity_N_values(th, pts, eps * f1, eps * df1,
                                            eps * f2)
        norms.append(np.max(np.abs(N)))
    slopes = np.diff(np.log(norms)) / np.diff(np.log(eps_list))
    assert np.all(np.abs(np.array(slopes) - 2.0) < 0.1)


# ---------------------------------------------------------------------------
# static field equation

def test_profile_is_discrete_zero_of_rhs():
    d = 3
    g = CubeGrid(d, 32)
    rep = operators.static_residual_report(SymmetryParams.zero(d), g)
    assert rep["sup_residual"] <= 10.0 * rep["stencil_estimate"]


# ---------------------------------------------------------------------------
# Taylor identities for the abstract nonlinearity

def test_taylor_identities_exact_derivatives():
    m, kk = 4, 3
    A = RNG.standard_normal((kk, m))
    B = RNG.standard_normal((kk, m, m))
    B = 0.5 * (B + np.swapaxes(B, 1, 2))
    C = RNG.standard_normal((kk, m, m, m))
    C = (C + np.transpose(C, (0, 1, 3, 2)) + np.transpose(C, (0, 2, 1, 3))
         + np.transpose(C, (0, 2, 3, 1)) + np.transpose(C, (0, 3, 1, 2))
         + np.transpose(C, (0, 3, 2, 1))) / 6.0  # symmetric in (a, b, c)

    def F(x):
        return A @ x + np.einsum("kab,a,b->k", B, x, x) \
            + np.einsum("kabc,a,b,c->k", C, x, x, x)

    def dF(x):
        return A + 2.0 * np.einsum("kab,b->ka", B, x) \
            + 3.0 * np.einsum("kabc,b,c->ka", C, x, x)

    def d2F(x):
        return 2.0 * B + 6.0 * np.einsum("kabc,c->kab", C, x)

    y0 = RNG.standard_normal(m)
    y = RNG.standard_normal(m)
    y1 = RNG.standard_normal(m)
    y2 = RNG.standard_normal(m)
    dq, dd = operators.taylor_identity_check(F, y0, y, y1, y2, dF=dF, d2F=d2F)
    assert dq <= 1e-10
    assert dd <= 1e-10


def test_taylor_identities_fd_fallback():
    def F(x):
        return np.array([np.sin(x[0]) * x[1], x[0] ** 2 - np.cos(x[1])])

    dq, dd = operators.taylor_identity_check(
        F, np.array([0.3, -0.2]), np.array([0.11, 0.07]),
        np.array([0.05, -0.03]), np.array([-0.04, 0.06]))
    assert dq <= 1e-6
    assert dd <= 1e-6
