"""Method-of-lines evolution of the perturbation system on the cylinder.

The semi-discrete system is

    d/dtau u = G(v_Theta + u) - G(v_Theta),   G(f) = Ltilde f + bold-F(f),

advanced with classical RK4 on the cube grid.  The background pair
(v_Theta, Lambda v_Theta) and its nonlinearity are cached pointwise with exact
Jacobians, so u = 0 is a fixed point to machine precision and the right-hand
side is exact on polynomial states.  No boundary condition is imposed: the
outermost shells use the grid's one-sided stencils (pure outflow), with an
optional sponge ring on 1 < |xi| <= L.

Amplitude tracking uses the Gram dual basis of the p(d)+d+1 parameter-derivative
modes: the Gram matrix is assembled with exact jet inner products, while a
trajectory's pairings are quadrature values (grid samples interpolated to the
ball nodes).  Blowup-parameter fitting is a damped Newton iteration on the
final-time amplitude map with the frozen linear-theory Jacobian: a parameter
offset q shifts the initial amplitudes by q + O(q^2), the lambda = 1 block then
grows like e^tau and the lambda = 0 block is constant, so the update is

    q <- q - (e^{-tau_max} a_1(tau_max), a_0(tau_max)).
"""

import numpy as np

from . import geometry, symmetry
from .cubegrid import CubeGrid
from .ballgrid import BallGrid
from .fields import PairJet, TrigJet, multi_indices, multinomial
from .operators import GridPair, nonlinearity_F_values

try:
    from numba import njit as _njit
    _HAVE_NUMBA = True
except ImportError:                                   # pragma: no cover
    _HAVE_NUMBA = False

    def _njit(*a, **k):
        def wrap(f):
            return f
        return wrap


# RK4 + the 4th-order upwinded-edge stencils are unstable at Courant 0.5 on
# this system (measured: white-noise seeds overflow by tau ~ 1); 0.4 is the
# empirical edge, 0.35 leaves margin.
DEFAULT_CFL = 0.35
DEFAULT_TAU_MAX = 6.0
SPONGE_POWER = 2
NORM_FLOOR = 1e-12
GRAM_COND_MAX = 1e10


# ---------------------------------------------------------------------------
# frames and initial data

class BlowupFrame:
    """Candidate blowup point (T, X); data live on the radius-2 ball, so the
    rescaled unit cone needs |X| + T <= 2."""

    def __init__(self, T, X):
        self.T = float(T)
        self.X = np.asarray(X, dtype=float)
        if self.T <= 0:
            raise ValueError("blowup time T must be positive")
        if np.linalg.norm(self.X) + self.T > 2.0 + 1e-12:
            raise ValueError("frame escapes the sampled ball: |X| + T > 2")

    @classmethod
    def reference(cls, d):
        return cls(1.0, np.zeros(d))


def _eval_pair(f, pts):
    """Values (f1, f2) of perturbation data at points; accepts a PairJet or any
    object with callable attributes f1, f2; None means zero data."""
    if f is None:
        z = np.zeros_like(pts)
        return z, z.copy()
    if isinstance(f, PairJet):
        return np.real(f.f1.ev(pts)), np.real(f.f2.ev(pts))
    return np.asarray(f.f1(pts), dtype=float), np.asarray(f.f2(pts), dtype=float)


def initial_data(f, frame, theta, grid):
    """u(0) = f^{T,X} + v_0^{T,X} - v_Theta on the cube grid.

    The frame rescaling is (f^{T,X})_1(xi) = f1(X + T xi),
    (f^{T,X})_2(xi) = T f2(X + T xi), and the frame-shifted chart profile is
    v_0^{T,X}(xi) = ((X + T xi)/sqrt(d-2), T (X + T xi)/sqrt(d-2)).
    """
    d = grid.d
    if theta.d != d:
        raise ValueError("dimension mismatch between theta and grid")
    pts = grid.points()
    y = frame.X[None, :] + frame.T * pts
    f1, f2 = _eval_pair(f, y)
    s = 1.0 / np.sqrt(d - 2.0)
    u1 = f1 + s * y - symmetry.v_theta(pts, theta)
    Dv = symmetry.v_theta_jacobian(pts, theta)
    lam_v = np.einsum("pcd,pd->pc", Dv, pts)
    u2 = frame.T * f2 + frame.T * s * y - lam_v
    shp = (grid.n,) * d + (d,)
    return GridPair(grid, u1.reshape(shp), u2.reshape(shp))


def sphere_perturbation_data(d, eps, seed, n_waves=3, kmax=1):
    """Smooth sphere-valued Cauchy perturbation of size eps in the chart.

    The map data are Y(x) = normalize(V_*(x) + eps b1(x)) with its time
    derivative tangent-projected, then both are pushed through the chart and
    the blowup data are subtracted.  By construction the perturbed data are
    exactly sphere-valued (position on S^d, velocity tangent).
    """
    rng = np.random.default_rng(seed)
    b1 = TrigJet.random_real(d, d + 1, n_waves, kmax, rng)
    b2 = TrigJet.random_real(d, d + 1, n_waves, kmax, rng)
    s = 1.0 / np.sqrt(d - 2.0)

    def _sphere_data(pts):
        pts = np.asarray(pts, dtype=float)
        V = geometry.v_star(pts, d)
        Y = V + eps * np.real(b1.ev(pts))
        Y = Y / np.linalg.norm(Y, axis=-1, keepdims=True)
        # background time derivative of the map data through the chart is
        # Lambda of the profile; build it from the chart value x/sqrt(d-2)
        z = s * pts
        r2 = np.sum(z * z, axis=-1, keepdims=True)
        den = 1.0 + r2
        # d/dt stereo^{-1}(z(t)) with z(t) = x/((1-t) sqrt(d-2)) at t = 0:
        # chain rule through stereo_inv, dz/dt = z
        dz = z
        zdz = np.sum(z * dz, axis=-1, keepdims=True)
        Vdot_head = 2.0 * dz / den - 4.0 * z * zdz / den**2
        Vdot_tail = -4.0 * zdz / den**2
        Vdot = np.concatenate([Vdot_head, Vdot_tail], axis=-1)
        W = Vdot + eps * np.real(b2.ev(pts))
        W = W - np.sum(W * Y, axis=-1, keepdims=True) * Y
        return Y, W

    def f1(pts):
        Y, _ = _sphere_data(np.asarray(pts, dtype=float))
        return geometry.stereo(Y) - s * np.asarray(pts, dtype=float)

    def f2(pts):
        pts = np.asarray(pts, dtype=float)
        Y, W = _sphere_data(pts)
        last = Y[..., -1:]
        dchart = W[..., :-1] / (1.0 + last) \
            - Y[..., :-1] * W[..., -1:] / (1.0 + last)**2
        return dchart - s * pts

    class _Pair:
        pass

    out = _Pair()
    out.f1 = f1
    out.f2 = f2
    return out


# ---------------------------------------------------------------------------
# right-hand side

def _stencil_table(D):
    """Per-row (start, padded weights) of a banded derivative matrix."""
    n = D.shape[0]
    starts = np.zeros(n, dtype=np.int64)
    spans = []
    for i in range(n):
        nz = np.nonzero(D[i])[0]
        starts[i] = nz.min()
        spans.append(nz.max() - nz.min() + 1)
    wmax = max(spans)
    wts = np.zeros((n, wmax))
    for i in range(n):
        wts[i, :spans[i]] = D[i, starts[i]:starts[i] + spans[i]]
    return starts, wts


@_njit(cache=True)
def _rhs_kernel_d3(f1, f2, v1, Dv, w, Fb, ax, s1, w1, s2, w2, sig,
                   out1, out2):                       # pragma: no cover
    n = f1.shape[0]
    nt1 = w1.shape[1]
    nt2 = w2.shape[1]
    g1 = np.empty((3, 3))
    lam1 = np.empty(3)
    lam2 = np.empty(3)
    lap = np.empty(3)
    z = np.empty(3)
    fw = np.empty(3)
    Bz = np.empty(3)
    Gax = np.empty(3)
    for i in range(n):
        xi0 = ax[i]
        for j in range(n):
            xi1 = ax[j]
            for k in range(n):
                xi2 = ax[k]
                for c in range(3):
                    d0 = 0.0
                    d1 = 0.0
                    d2 = 0.0
                    e0 = 0.0
                    e1 = 0.0
                    e2 = 0.0
                    lp = 0.0
                    b = s1[i]
                    for t in range(nt1):
                        wt = w1[i, t]
                        if wt != 0.0:
                            d0 += wt * f1[b + t, j, k, c]
                            e0 += wt * f2[b + t, j, k, c]
                    b = s1[j]
                    for t in range(nt1):
                        wt = w1[j, t]
                        if wt != 0.0:
                            d1 += wt * f1[i, b + t, k, c]
                            e1 += wt * f2[i, b + t, k, c]
                    b = s1[k]
                    for t in range(nt1):
                        wt = w1[k, t]
                        if wt != 0.0:
                            d2 += wt * f1[i, j, b + t, c]
                            e2 += wt * f2[i, j, b + t, c]
                    b = s2[i]
                    for t in range(nt2):
                        wt = w2[i, t]
                        if wt != 0.0:
                            lp += wt * f1[b + t, j, k, c]
                    b = s2[j]
                    for t in range(nt2):
                        wt = w2[j, t]
                        if wt != 0.0:
                            lp += wt * f1[i, b + t, k, c]
                    b = s2[k]
                    for t in range(nt2):
                        wt = w2[k, t]
                        if wt != 0.0:
                            lp += wt * f1[i, j, b + t, c]
                    g1[c, 0] = d0
                    g1[c, 1] = d1
                    g1[c, 2] = d2
                    lam1[c] = d0 * xi0 + d1 * xi1 + d2 * xi2
                    lam2[c] = e0 * xi0 + e1 * xi1 + e2 * xi2
                    lap[c] = lp
                zz = 0.0
                s2v = 0.0
                trB = 0.0
                for c in range(3):
                    z[c] = v1[i, j, k, c] + f1[i, j, k, c]
                    fw[c] = w[i, j, k, c] + f2[i, j, k, c]
                for c in range(3):
                    zz += z[c] * z[c]
                    s2v += fw[c] * z[c]
                    trB += fw[c] * fw[c]
                for c in range(3):
                    Bz[c] = fw[c] * s2v
                for a in range(3):
                    gz = 0.0
                    for c in range(3):
                        G = Dv[i, j, k, c, a] + g1[c, a]
                        Gax[c] = G
                        gz += G * z[c]
                        trB -= G * G
                    for c in range(3):
                        Bz[c] -= Gax[c] * gz
                pref = -2.0 / (1.0 + zz)
                sg = sig[i, j, k]
                for c in range(3):
                    Ff = pref * (2.0 * Bz[c] - z[c] * trB)
                    out1[i, j, k, c] = -lam1[c] + f2[i, j, k, c] \
                        - sg * f1[i, j, k, c]
                    out2[i, j, k, c] = lap[c] - lam2[c] - f2[i, j, k, c] \
                        - (Ff - Fb[i, j, k, c]) - sg * f2[i, j, k, c]


class BlowupDetected(RuntimeError):
    """Raised when a trajectory leaves the floating-point range."""

    def __init__(self, tau):
        super().__init__("non-finite state at tau = %.6f" % tau)
        self.tau = tau


class EvolutionSystem:
    """Cached background + stencil tables for one (grid, Theta) pair."""

    def __init__(self, grid, theta, sponge=0.0):
        if grid.d != theta.d:
            raise ValueError("dimension mismatch between grid and theta")
        self.grid = grid
        self.theta = theta
        d = grid.d
        shp = (grid.n,) * d + (d,)
        pts = grid.points()
        self.v1 = symmetry.v_theta(pts, theta).reshape(shp)
        Dv = symmetry.v_theta_jacobian(pts, theta)
        self.w = np.einsum("pcd,pd->pc", Dv, pts).reshape(shp)
        self.Dv = Dv.reshape(shp + (d,))
        self.Fb = nonlinearity_F_values(
            self.v1, self.Dv, self.w)
        r = np.sqrt(grid.r2)
        ramp = np.clip((r - 1.0) / (grid.L - 1.0), 0.0, 1.0)
        self.sigma = float(sponge) * ramp**SPONGE_POWER
        self._s1, self._w1 = _stencil_table(grid.D1)
        self._s2, self._w2 = _stencil_table(grid.D2)
        self._fast = _HAVE_NUMBA and d == 3

    def rhs(self, u):
        """G(v_Theta + u) - G(v_Theta) as a GridPair."""
        if self._fast:
            out1 = np.empty_like(u.f1)
            out2 = np.empty_like(u.f2)
            _rhs_kernel_d3(u.f1, u.f2, self.v1, self.Dv, self.w, self.Fb,
                           self.grid.axis, self._s1, self._w1,
                           self._s2, self._w2, self.sigma, out1, out2)
            return GridPair(self.grid, out1, out2)
        return self._rhs_plain(u)

    def _rhs_plain(self, u):
        g = self.grid
        grad1 = g.gradient(u.f1)
        lam1 = np.einsum("...md,...d->...m", grad1, g.xi)
        lam2 = g.scaling_vector_field(u.f2)
        Ffull = nonlinearity_F_values(self.v1 + u.f1, self.Dv + grad1,
                                      self.w + u.f2)
        first = -lam1 + u.f2 - self.sigma[..., None] * u.f1
        second = g.laplacian(u.f1) - lam2 - u.f2 - (Ffull - self.Fb) \
            - self.sigma[..., None] * u.f2
        return GridPair(g, first, second)

    def step(self, u, dtau):
        """One classical RK4 step; raises BlowupDetected on overflow."""
        k1 = self.rhs(u)
        k2 = self.rhs(_axpy(u, 0.5 * dtau, k1))
        k3 = self.rhs(_axpy(u, 0.5 * dtau, k2))
        k4 = self.rhs(_axpy(u, dtau, k3))
        c = dtau / 6.0
        f1 = u.f1 + c * (k1.f1 + 2.0 * k2.f1 + 2.0 * k3.f1 + k4.f1)
        f2 = u.f2 + c * (k1.f2 + 2.0 * k2.f2 + 2.0 * k3.f2 + k4.f2)
        return GridPair(self.grid, f1, f2)


def _axpy(u, a, v):
    return GridPair(u.grid, u.f1 + a * v.f1, u.f2 + a * v.f2)


class EvolutionState:
    """A point on a trajectory: similarity time, field, and frame data."""

    def __init__(self, tau, field, theta, frame):
        self.tau = float(tau)
        self.field = field
        self.theta = theta
        self.frame = frame


# ---------------------------------------------------------------------------
# dual basis and amplitude tracking

class GramDualBasis:
    """Dual basis of the p(d)+d+1 parameter modes in the order-k inner product.

    The dual fields are kept in coefficient form: the b-th dual is
    sum_a gram_inv[b, a] f_a, so a pairing (u|g^b) is gram_inv @ (u|f_a).
    Mode samples at the quadrature nodes are precomputed once (exact jet
    values), so the Gram matrix and all later pairings are weighted dots.
    """

    def __init__(self, theta, k, grid):
        self.theta = theta
        self.k = int(k)
        self.grid = grid
        self.modes, self.labels = symmetry.parameter_modes(theta)
        d = theta.d
        self.alphas = _alpha_list(d, self.k)
        # per mode, per alpha: raw samples (grad f1 at nodes, f2 at nodes,
        # f1 at boundary nodes)
        self.samples = [[_jet_samples(mode.deriv(alpha), grid)
                         for alpha, _ in self.alphas] for mode in self.modes]
        m = len(self.modes)
        G = np.empty((m, m))
        for a in range(m):
            for b in range(a, m):
                val = sum(wt * _h1_dot(self.samples[a][ia],
                                       self.samples[b][ia], grid)
                          for ia, (_, wt) in enumerate(self.alphas))
                G[a, b] = val
                G[b, a] = val
        evals = np.linalg.eigvalsh(G)
        if evals[0] <= 0 or evals[-1] / evals[0] > GRAM_COND_MAX:
            raise ValueError("ill-conditioned Gram matrix (cond %.2e); refine "
                             "the quadrature grid" % (evals[-1] / max(evals[0],
                                                                      1e-300)))
        self.gram = G
        self.gram_inv = np.linalg.inv(G)
        self.n_modes = m
        # eigenvalue of each mode under the linearized generator
        self.lams = np.array([1.0 if lab[0] in ("param-T", "param-X") else 0.0
                              for lab in self.labels])

    def biorthogonality_defect(self):
        """max |(f_a | g^b) - delta| over all pairs."""
        return float(np.max(np.abs(self.gram_inv @ self.gram - np.eye(
            self.n_modes))))

    def pairings_jet(self, f):
        """(f|f_a) for an exact jet pair, same quadrature as the Gram."""
        out = np.empty(self.n_modes)
        for a in range(self.n_modes):
            out[a] = sum(wt * _h1_dot(_jet_samples(f.deriv(alpha), self.grid),
                                      self.samples[a][ia], self.grid)
                         for ia, (alpha, wt) in enumerate(self.alphas))
        return out

    def amplitudes_jet(self, f):
        return self.gram_inv @ self.pairings_jet(f)


def _jet_samples(f, grid):
    """Raw node samples of the H1 factors of a jet pair: (grad f1 at the
    interior nodes, f2 at the interior nodes, f1 at the boundary nodes)."""
    d = grid.d
    d1 = np.stack([np.real(f.f1.ev(grid.nodes, _unit_tuple(d, j)))
                   for j in range(d)])
    return d1, np.real(f.f2.ev(grid.nodes)), np.real(f.f1.ev(grid.bnodes))


def _h1_dot(sa, sb, grid):
    """Quadrature H1 inner product from raw samples."""
    wq = grid.weights[:, None]
    wb = grid.bweights[:, None]
    return float(np.sum(sa[0] * sb[0] * wq[None]) + np.sum(sa[1] * sb[1] * wq)
                 + np.sum(sa[2] * sb[2] * wb))


class _CubicSampler:
    """Tensor-product cubic Lagrange interpolation from a uniform cube grid to
    a fixed point set, with indices and weights precomputed."""

    def __init__(self, grid, pts):
        self.d = grid.d
        n = grid.n
        s = (np.asarray(pts) + grid.L) / grid.h      # index coordinates
        i0 = np.clip(np.floor(s).astype(int) - 1, 0, n - 4)
        t = s - i0                                    # in [1, 2] away from edges
        self.idx = [i0[:, ax][:, None] + np.arange(4)[None, :]
                    for ax in range(self.d)]
        self.wts = [_lagrange_weights(t[:, ax]) for ax in range(self.d)]

    def __call__(self, u):
        """Sample a grid array of shape grid + trailing at the point set."""
        d = self.d
        npts = self.idx[0].shape[0]
        inds = tuple(self.idx[ax].reshape(
            (npts,) + tuple(4 if a == ax else 1 for a in range(d)))
            for ax in range(d))
        out = u[inds]
        for ax in range(d):
            out = np.einsum("pa...,pa->p...", out, self.wts[ax])
        return out


def _lagrange_weights(t):
    """Cubic Lagrange weights at offset t for nodes {0, 1, 2, 3}."""
    w = np.empty((t.shape[0], 4))
    w[:, 0] = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0
    w[:, 1] = t * (t - 2.0) * (t - 3.0) / 2.0
    w[:, 2] = -t * (t - 1.0) * (t - 3.0) / 2.0
    w[:, 3] = t * (t - 1.0) * (t - 2.0) / 6.0
    return w


def build_dual_basis(theta, k, grid):
    return GramDualBasis(theta, k, grid)


def _alpha_list(d, k):
    """Derivative tuples entering the inhomogeneous order-k form: the plain
    H1 term plus the weighted top-order (|alpha| = k-1) terms."""
    out = [((0,) * d, 1.0)]
    if k >= 2:
        for alpha in multi_indices(d, k - 1):
            out.append((alpha, float(multinomial(k - 1, alpha))))
    return out


class AmplitudeTracker:
    """Quadrature pairings of grid states against the dual basis.

    Grid samples are interpolated (tensor cubic, precomputed weights) to the
    ball nodes; the mode-side factors reuse the exact jet samples stored on
    the basis.  k = 1 is the cheap default path; higher k differentiates the
    grid state with the FD stencils.
    """

    def __init__(self, basis, cube):
        self.basis = basis
        self.cube = cube
        self.grid = basis.grid
        self.alphas = basis.alphas
        self._nodes = _CubicSampler(cube, self.grid.nodes)
        self._bnodes = _CubicSampler(cube, self.grid.bnodes)
        wq = self.grid.weights[:, None]
        wb = self.grid.bweights[:, None]
        # per mode and per alpha: quadrature-weighted samples for pairings
        self.mode_w = [[(wt * s[0] * wq[None], wt * s[1] * wq, wt * s[2] * wb)
                        for (_, wt), s in zip(self.alphas, per)]
                       for per in basis.samples]
        # raw alpha = 0 samples for the stable-part reconstruction
        self.mode_nodes = [per[0] for per in basis.samples]

    def _state_samples(self, u, alpha):
        """(grad f1, f2, boundary f1) of D^alpha u at the ball nodes."""
        cube = self.cube
        f1 = u.f1
        f2 = u.f2
        for ax, m in enumerate(alpha):
            for _ in range(m):
                f1 = cube.diff(f1, ax)
                f2 = cube.diff(f2, ax)
        grad = cube.gradient(f1)                      # grid + (d, d)
        d1 = np.moveaxis(self._nodes(grad), -1, 0)    # (d, npts, d)
        return d1, self._nodes(f2), self._bnodes(f1)

    def pairings(self, u):
        out = np.zeros(self.basis.n_modes)
        for ia, (alpha, _) in enumerate(self.alphas):
            d1, f2i, b1 = self._state_samples(u, alpha)
            for b in range(self.basis.n_modes):
                md1, mf2, mb1 = self.mode_w[b][ia]
                out[b] += np.sum(d1 * md1) + np.sum(f2i * mf2) \
                    + np.sum(b1 * mb1)
        return out

    def amplitudes(self, u):
        return self.basis.gram_inv @ self.pairings(u)

    def record(self, u):
        """(H1 norm, order-k norm, amplitudes, stable-part H1 norm)."""
        d1, f2i, b1 = self._state_samples(u, (0,) * self.cube.d)
        wq = self.grid.weights[:, None]
        wb = self.grid.bweights[:, None]
        h1 = np.sum(d1**2 * wq[None]) + np.sum(f2i**2 * wq) \
            + np.sum(b1**2 * wb)
        pair = np.zeros(self.basis.n_modes)
        hk = h1 if self.basis.k == 1 else 0.0
        for ia, (alpha, wt) in enumerate(self.alphas):
            if sum(alpha) == 0:
                da, fa, ba = d1, f2i, b1
            else:
                da, fa, ba = self._state_samples(u, alpha)
                hk += wt * (np.sum(da**2 * wq[None]) + np.sum(fa**2 * wq)
                            + np.sum(ba**2 * wb))
            for b in range(self.basis.n_modes):
                md1, mf2, mb1 = self.mode_w[b][ia]
                pair[b] += np.sum(da * md1) + np.sum(fa * mf2) \
                    + np.sum(ba * mb1)
        if self.basis.k > 1:
            hk += h1
        amps = self.basis.gram_inv @ pair
        rd1 = d1 - np.tensordot(amps, [m[0] for m in self.mode_nodes], axes=1)
        rf2 = f2i - np.tensordot(amps, [m[1] for m in self.mode_nodes], axes=1)
        rb1 = b1 - np.tensordot(amps, [m[2] for m in self.mode_nodes], axes=1)
        stable = np.sum(rd1**2 * wq[None]) + np.sum(rf2**2 * wq) \
            + np.sum(rb1**2 * wb)
        return (float(np.sqrt(max(h1, 0.0))), float(np.sqrt(max(hk, 0.0))),
                amps, float(np.sqrt(max(stable, 0.0))))


def _unit_tuple(d, j):
    e = [0] * d
    e[j] = 1
    return tuple(e)


def mode_amplitudes(state, basis, tracker=None):
    """a^b = (u|g^b): exact for jet states, quadrature for grid states."""
    u = state.field if isinstance(state, EvolutionState) else state
    if isinstance(u, PairJet):
        return basis.amplitudes_jet(u)
    if tracker is None:
        tracker = AmplitudeTracker(basis, u.grid)
    return tracker.amplitudes(u)


# ---------------------------------------------------------------------------
# traces

class EvolutionTrace:
    """Per-record (tau, norms, amplitudes, stable-part norm) of one run."""

    def __init__(self, labels, lams, meta=None):
        self.labels = labels
        self.lams = np.asarray(lams, dtype=float)
        self.meta = dict(meta or {})
        self.taus = []
        self.norm_h1 = []
        self.norm_hk = []
        self.amps = []
        self.stable_norm = []
        self.final_state = None

    def add(self, tau, h1, hk, amps, stable):
        if self.taus and tau <= self.taus[-1]:
            raise ValueError("trace records must be strictly increasing in tau")
        self.taus.append(float(tau))
        self.norm_h1.append(float(h1))
        self.norm_hk.append(float(hk))
        self.amps.append(np.asarray(amps, dtype=float))
        self.stable_norm.append(float(stable))

    def amplitude_matrix(self):
        return np.array(self.amps)

    def span(self):
        return self.taus[-1] - self.taus[0] if len(self.taus) > 1 else 0.0

    def to_rows(self):
        rows = []
        for i, tau in enumerate(self.taus):
            rows.append([tau, self.norm_h1[i], self.norm_hk[i],
                         self.stable_norm[i]] + list(self.amps[i]))
        return rows

    def header(self):
        return (["tau", "norm_H1", "norm_Hk", "stable_norm"]
                + ["amp_%d" % b for b in range(len(self.lams))])


def evolve(u0, theta, tau_max, grid=None, dtau=None, cfl=DEFAULT_CFL,
           basis=None, tracker=None, sponge=0.0, record_every=1,
           system=None):
    """Advance u0 to tau_max with RK4 and record the trace.

    dtau defaults to cfl * h (grid spacing) and is rounded down so an integer
    number of steps lands exactly on tau_max.
    """
    grid = grid if grid is not None else u0.grid
    if system is None:
        system = EvolutionSystem(grid, theta, sponge=sponge)
    if dtau is None:
        dtau = cfl * grid.h
    n_steps = max(1, int(np.ceil(tau_max / dtau - 1e-12)))
    dtau = tau_max / n_steps
    if basis is not None and tracker is None:
        tracker = AmplitudeTracker(basis, grid)
    trace = EvolutionTrace(basis.labels if basis else [],
                           basis.lams if basis else [],
                           meta={"tau_max": tau_max, "dtau": dtau,
                                 "n": grid.n, "d": grid.d})
    u = u0.copy()
    tau = 0.0

    def _rec():
        if tracker is not None:
            h1, hk, amps, stable = tracker.record(u)
            trace.add(tau, h1, hk, amps, stable)

    _rec()
    for i in range(n_steps):
        u = system.step(u, dtau)
        tau = (i + 1) * dtau
        if not np.all(np.isfinite(u.f2)):
            raise BlowupDetected(tau)
        if (i + 1) % record_every == 0 or i == n_steps - 1:
            _rec()
    trace.final_state = EvolutionState(tau, u, theta, None)
    return trace


# ---------------------------------------------------------------------------
# decay fitting and parameter fitting

def _loglinear_fit(taus, vals):
    """Slope/intercept/stderr of log(vals) against tau."""
    t = np.asarray(taus)
    y = np.log(np.asarray(vals))
    A = np.stack([t, np.ones_like(t)], axis=1)
    coef, res, _, _ = np.linalg.lstsq(A, y, rcond=None)
    npts = len(t)
    if npts > 2 and res.size:
        s2 = res[0] / (npts - 2)
        cov = s2 * np.linalg.inv(A.T @ A)
        se = float(np.sqrt(cov[0, 0]))
    else:
        se = 0.0
    return float(coef[0]), float(coef[1]), se


def decay_report(trace, skip_fraction=1.0 / 3.0):
    """Fitted decay rate of the stable-part norm (and lambda = 1 block growth).

    Requires a tau span >= 3; the fit drops the initial transient
    (first `skip_fraction` of the span).  A stable-part norm entirely below
    the floor is reported as such instead of a rate.
    """
    if trace.span() < 3.0 - 1e-9:
        raise ValueError("trace must span a tau-interval >= 3 for a rate fit")
    taus = np.array(trace.taus)
    stable = np.array(trace.stable_norm)
    t0 = taus[0] + skip_fraction * trace.span()
    sel = taus >= t0
    out = {"tau_window": [float(taus[sel][0]), float(taus[-1])]}
    if np.max(stable) < NORM_FLOOR:
        out.update({"below_floor": True, "eps_fit": None, "eps_band": None})
    else:
        vals = np.maximum(stable[sel], NORM_FLOOR)
        slope, _, se = _loglinear_fit(taus[sel], vals)
        out.update({"below_floor": False, "eps_fit": -slope,
                    "eps_band": 1.96 * se})
    amat = trace.amplitude_matrix()
    if amat.size:
        unst = np.sqrt(np.sum(amat[:, trace.lams == 1.0]**2, axis=1))
        if np.max(unst) > NORM_FLOOR:
            g, _, gse = _loglinear_fit(taus[sel],
                                       np.maximum(unst[sel], NORM_FLOOR))
            out["unstable_growth"] = g
            out["unstable_growth_band"] = 1.96 * gse
    return out


class FitResult:
    def __init__(self, success, frame, theta, trace, iterations, reason=""):
        self.success = success
        self.frame = frame
        self.theta = theta
        self.trace = trace
        self.iterations = iterations
        self.reason = reason

    @property
    def T(self):
        return self.frame.T

    @property
    def X(self):
        return self.frame.X


def fit_blowup_parameters(f, grid, box_delta=0.1, k=1, tau_max=DEFAULT_TAU_MAX,
                          tol_amp=1e-3, max_iter=6, damping=1.0,
                          quad_n=None, sponge=0.0, record_every=4,
                          ball=None):
    """Damped Newton on (T, X, Theta) so the tracked unstable amplitudes of the
    evolved perturbation vanish at tau_max.

    Convergence is not guaranteed; a miss (residual above tol_amp, or the
    iterate leaving the search box [1-delta, 1+delta] x B_delta x B_delta) is
    reported in the result, not raised.
    """
    d = grid.d
    p = symmetry.p_of_d(d)
    if ball is None:
        ball = BallGrid(d, max(10, grid.n // 4) if quad_n is None else quad_n)
    q = np.zeros(1 + d + p)
    iterations = []
    trace = None
    theta = symmetry.SymmetryParams.zero(d)
    frame = BlowupFrame.reference(d)
    for it in range(max_iter):
        frame = BlowupFrame(1.0 + q[0], q[1:1 + d])
        theta = symmetry.SymmetryParams.from_flat(q[1 + d:], d)
        basis = GramDualBasis(theta, k, ball)
        u0 = initial_data(f, frame, theta, grid)
        try:
            trace = evolve(u0, theta, tau_max, grid=grid, basis=basis,
                           sponge=sponge, record_every=record_every)
        except BlowupDetected as exc:
            iterations.append({"q": q.copy(), "blowup_tau": exc.tau})
            return FitResult(False, frame, theta, trace, iterations,
                             reason="trajectory blew up at tau %.3f" % exc.tau)
        a_end = trace.amps[-1]
        unstable = basis.lams == 1.0
        resid = float(np.max(np.abs(a_end[unstable])))
        iterations.append({"q": q.copy(), "amps_end": a_end.copy(),
                           "unstable_resid": resid})
        if resid <= tol_amp:
            return FitResult(True, frame, theta, trace, iterations)
        # frozen linear-theory Jacobian: amplitudes respond 1:1 to q, the
        # lambda = 1 block amplified by e^{tau}, the lambda = 0 block constant.
        # Read the constant block off an early record (tau ~ 1), before the
        # growing mode contaminates it nonlinearly.
        i_early = int(np.argmin(np.abs(np.array(trace.taus) - 1.0)))
        step = np.where(unstable, np.exp(-trace.taus[-1]) * a_end,
                        trace.amps[i_early])
        # amplitude order is (T, X, Theta) = the q order
        q = q - damping * step
        if abs(q[0]) > box_delta or np.linalg.norm(q[1:1 + d]) > box_delta \
                or np.linalg.norm(q[1 + d:]) > box_delta:
            return FitResult(False, frame, theta, trace, iterations,
                             reason="no fit in box")
    return FitResult(False, frame, theta, trace, iterations,
                     reason="unstable residual %.3e above tol after %d "
                            "iterations" % (resid, max_iter))
