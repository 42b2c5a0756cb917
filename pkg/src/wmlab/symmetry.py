"""The p(d)-parameter symmetry group acting on the blowup solution, the profile
v_Theta, and the symmetry-generated eigenfields / parameter-derivative modes.

Parameters Theta = (alpha, beta, gamma) with alpha the d(d-1)/2 domain rotation
angles (lexicographic pair order (1,2),(1,3),...,(d-1,d)), beta the d boost
rapidities and gamma the d target rotation angles.  Group elements are built as
ordered products of one-parameter subgroups,

    R_alpha = exp(a_12 A_12) exp(a_13 A_13) ... exp(a_{d-1,d} A_{d-1,d}),
    L_beta  = exp(b_1 B_1) ... exp(b_d B_d),
    Rcal_gamma = exp(g_1 C_1) ... exp(g_d C_d),

each factor evaluated in closed form (Givens rotation / hyperbolic boost block).
The transformed blowup solution is

    U_Theta^{T,X}(t,x) = Rcal_gamma U_*( L_beta(t - T, R_alpha(x - X)) + (1,0) ).
"""

import itertools

import numpy as np

from . import geometry
from .fields import Jet, LambdaJet, PairJet, PolyJet, _unit

M0_DEFAULT = 0.1  # admissible symmetry-parameter radius (validated, not assumed)


def p_of_d(d):
    """Dimension of the symmetry parameter space, p(d) = d(d+3)/2."""
    if d < 3:
        raise ValueError("d must be >= 3")
    return d * (d + 3) // 2


class SymmetryParams:
    """Theta = (alpha, beta, gamma)."""

    def __init__(self, alpha, beta, gamma):
        self.alpha = np.asarray(alpha, dtype=float)
        self.beta = np.asarray(beta, dtype=float)
        self.gamma = np.asarray(gamma, dtype=float)
        d = self.beta.shape[0]
        if self.gamma.shape[0] != d or self.alpha.shape[0] != d * (d - 1) // 2:
            raise ValueError("inconsistent parameter lengths")
        self.d = d

    @classmethod
    def zero(cls, d):
        return cls(np.zeros(d * (d - 1) // 2), np.zeros(d), np.zeros(d))

    @classmethod
    def from_flat(cls, vec, d):
        vec = np.asarray(vec, dtype=float)
        na = d * (d - 1) // 2
        if vec.shape[0] != p_of_d(d):
            raise ValueError("flat parameter vector must have length p(d)")
        return cls(vec[:na], vec[na:na + d], vec[na + d:])

    def to_flat(self):
        return np.concatenate([self.alpha, self.beta, self.gamma])

    @classmethod
    def random(cls, d, radius, rng):
        v = rng.standard_normal(p_of_d(d))
        v *= radius / np.linalg.norm(v)
        return cls.from_flat(v, d)

    def norm(self):
        return float(np.linalg.norm(self.to_flat()))

    def to_json_dict(self):
        return {"alpha": self.alpha.tolist(), "beta": self.beta.tolist(),
                "gamma": self.gamma.tolist()}

    @classmethod
    def from_json_dict(cls, obj):
        return cls(obj["alpha"], obj["beta"], obj["gamma"])


def rotation_pairs(d):
    """Lexicographic (i, j) index pairs, 0-based, for the alpha angles."""
    return list(itertools.combinations(range(d), 2))


def group_elements(theta):
    """(R_alpha, L_beta, Rcal_gamma) as matrices (d x d, (d+1) x (d+1), (d+1) x (d+1)).

    L_beta acts on spacetime vectors ordered (t, x^1..x^d); Rcal_gamma acts on
    target vectors (y^1..y^{d+1}).
    """
    d = theta.d
    R = np.eye(d)
    for (i, j), a in zip(rotation_pairs(d), theta.alpha):
        G = np.eye(d)
        c, s = np.cos(a), np.sin(a)
        # exp(a A_ij) with (A)_ij = 1, (A)_ji = -1
        G[i, i] = c
        G[j, j] = c
        G[i, j] = s
        G[j, i] = -s
        R = R @ G
    L = np.eye(d + 1)
    for i in range(d):
        B = np.eye(d + 1)
        ch, sh = np.cosh(theta.beta[i]), np.sinh(theta.beta[i])
        B[0, 0] = ch
        B[i + 1, i + 1] = ch
        B[0, i + 1] = sh
        B[i + 1, 0] = sh
        L = L @ B
    Rc = np.eye(d + 1)
    for i in range(d):
        C = np.eye(d + 1)
        c, s = np.cos(theta.gamma[i]), np.sin(theta.gamma[i])
        # exp(g C_i) with (C_i)_{i,d+1} = 1, (C_i)_{d+1,i} = -1
        C[i, i] = c
        C[d, d] = c
        C[i, d] = s
        C[d, i] = -s
        Rc = Rc @ C
    return R, L, Rc


def u_theta(t, x, T, X, theta, d):
    """Symmetry-transformed blowup solution at a spacetime point (sphere-valued)."""
    x = np.asarray(x, dtype=float)
    X = np.asarray(X, dtype=float)
    R, L, Rc = group_elements(theta)
    y = np.concatenate([[t - T], R @ (x - X)])
    z = L @ y
    z[0] += 1.0
    if z[0] == 1.0:
        raise ValueError("transformed time coordinate hits the singular slice")
    return Rc @ geometry.v_star(z[1:] / (1.0 - z[0]), d)


def _affine_data(theta, d):
    """The affine maps xi -> (t'(xi), x'(xi)) entering v_theta at t=0, T=1, X=0.

    t' = c + a . xi, x' = p + P xi.
    """
    R, L, _ = group_elements(theta)
    base = L @ np.concatenate([[-1.0], np.zeros(d)])
    base[0] += 1.0
    M = L[:, 1:] @ R  # action on the spatial part
    c, a = base[0], M[0, :]
    p, P = base[1:], M[1:, :]
    return c, a, p, P


def v_theta(xi, theta, d=None):
    """Chart image of the transformed profile, v_Theta(xi) = stereo(u_theta((0,xi),(1,0),Theta)).

    Vectorized over xi of shape (..., d).
    """
    d = theta.d if d is None else d
    xi = np.asarray(xi, dtype=float)
    c, a, p, P = _affine_data(theta, d)
    _, _, Rc = group_elements(theta)
    tp = c + xi @ a
    xp = p + xi @ P.T
    zeta = xp / (1.0 - tp)[..., None]
    y = geometry.v_star(zeta, d) @ Rc.T
    return geometry.stereo(y)


def v_theta_jacobian(xi, theta, d=None):
    """Exact Jacobian dv_Theta/dxi at points xi of shape (npts, d); returns
    an array of shape (npts, d, d) indexed [point, component, direction]."""
    d = theta.d if d is None else d
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    c, a, p, P = _affine_data(theta, d)
    _, _, Rc = group_elements(theta)
    tp = c + xi @ a
    xp = p + xi @ P.T
    s = 1.0 - tp
    zeta = xp / s[:, None]
    # D zeta = P/s + x' a^T / s^2
    Dz = P[None, :, :] / s[:, None, None] \
        + xp[:, :, None] * a[None, None, :] / (s**2)[:, None, None]
    # D V_* at zeta
    r2 = np.sum(zeta**2, axis=1)
    den = (d - 2) + r2
    eye = np.eye(d)
    DV_head = 2.0 * np.sqrt(d - 2.0) * (
        eye[None, :, :] * den[:, None, None]
        - 2.0 * zeta[:, :, None] * zeta[:, None, :]) / (den**2)[:, None, None]
    DV_tail = -4.0 * (d - 2) * zeta / (den**2)[:, None]
    DV = np.concatenate([DV_head, DV_tail[:, None, :]], axis=1)  # (npts, d+1, d)
    y = geometry.v_star(zeta, d) @ Rc.T
    Dy = np.einsum("ab,pbj,pjk->pak", Rc, DV, Dz)
    # D Psi at y
    w = y[:, -1]
    head = y[:, :-1]
    Dv = Dy[:, :-1, :] / (1.0 + w)[:, None, None] \
        - head[:, :, None] * Dy[:, -1, None, :] / ((1.0 + w)**2)[:, None, None]
    return Dv


def validate_theta_radius(theta, d=None, m0=M0_DEFAULT, n_sample=11):
    """Check |Theta| <= m0 and that the profile range keeps 1 + y^{d+1} > 1/2
    on a sample grid of the closed unit ball (the chart stays well-defined)."""
    d = theta.d if d is None else d
    if theta.norm() > m0 + 1e-12:
        raise ValueError("parameter norm exceeds the admissible radius M0")
    axes = [np.linspace(-1.0, 1.0, n_sample)] * d
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    pts = pts[np.sum(pts**2, axis=1) <= 1.0]
    c, a, p, P = _affine_data(theta, d)
    _, _, Rc = group_elements(theta)
    tp = c + pts @ a
    xp = p + pts @ P.T
    y = geometry.v_star(xp / (1.0 - tp)[:, None], d) @ Rc.T
    margin = float(np.min(1.0 + y[:, -1]))
    if margin <= 0.5:
        raise ValueError("profile range too close to the south pole; "
                         "reduce |Theta| (margin %.3f)" % margin)
    return margin


# ---------------------------------------------------------------------------
# symmetry-generated eigenfields (jet level)


def _poly_e(d, j, terms):
    """PolyJet with component j carrying `terms`, others zero."""
    comps = [dict() for _ in range(d)]
    comps[j] = terms
    return PolyJet(d, comps)


def _r2_terms(d, c):
    return {_unit(d, j, 2): c for j in range(d)}


def symmetry_mode(kind, d, index=None):
    """Explicit eigenfields of the linearized generator at Theta = 0.

    kinds (with index):
      'lambda0-translation', j          -> ((d - |xi|^2) e_j, -2 |xi|^2 e_j)
      'lambda0-rotation', (i, j)        -> (xi_i e_j - xi_j e_i, same)
      'lambda0-boostlike', j            -> (|xi|^2 e_j - d xi_j xi, 2 x same)
      'lambda1-time'                    -> (xi, 2 xi)
      'lambda1-space', j                -> (e_j, e_j)
    Returns a PairJet.
    """
    zero = (0,) * d
    if kind == "lambda0-translation":
        j = index
        if not 0 <= j < d:
            raise ValueError("index out of range")
        f1 = _poly_e(d, j, {zero: float(d), **_r2_terms(d, -1.0)})
        f2 = _poly_e(d, j, _r2_terms(d, -2.0))
        return PairJet(f1, f2)
    if kind == "lambda0-rotation":
        i, j = index
        if not (0 <= i < d and 0 <= j < d and i != j):
            raise ValueError("index out of range")
        comps = [dict() for _ in range(d)]
        comps[j][_unit(d, i)] = 1.0
        comps[i][_unit(d, j)] = -1.0
        f1 = PolyJet(d, comps)
        f2 = PolyJet(d, [dict(c) for c in comps])
        return PairJet(f1, f2)
    if kind == "lambda0-boostlike":
        j = index
        if not 0 <= j < d:
            raise ValueError("index out of range")
        comps = [dict() for _ in range(d)]
        for n in range(d):
            if n == j:
                comps[n] = dict(_r2_terms(d, 1.0))
            # -d xi_j xi_n
            mono = tuple(np.array(_unit(d, j)) + np.array(_unit(d, n)))
            comps[n][mono] = comps[n].get(mono, 0.0) - float(d)
        f1 = PolyJet(d, comps)
        f2 = PolyJet(d, [{k: 2.0 * v for k, v in c.items()} for c in comps])
        return PairJet(f1, f2)
    if kind == "lambda1-time":
        comps = [{_unit(d, n): 1.0} for n in range(d)]
        f1 = PolyJet(d, comps)
        f2 = PolyJet(d, [{k: 2.0 * v for k, v in c.items()} for c in comps])
        return PairJet(f1, f2)
    if kind == "lambda1-space":
        j = index
        if not 0 <= j < d:
            raise ValueError("index out of range")
        f1 = _poly_e(d, j, {zero: 1.0})
        f2 = _poly_e(d, j, {zero: 1.0})
        return PairJet(f1, f2)
    raise ValueError("unknown mode kind %r" % (kind,))


def all_symmetry_modes(d):
    """The full list: p(d) modes with eigenvalue 0, then d+1 with eigenvalue 1."""
    modes = []
    labels = []
    for j in range(d):
        modes.append(symmetry_mode("lambda0-translation", d, j))
        labels.append(("lambda0-translation", j))
    for (i, j) in rotation_pairs(d):
        modes.append(symmetry_mode("lambda0-rotation", d, (i, j)))
        labels.append(("lambda0-rotation", (i, j)))
    for j in range(d):
        modes.append(symmetry_mode("lambda0-boostlike", d, j))
        labels.append(("lambda0-boostlike", j))
    modes.append(symmetry_mode("lambda1-time", d))
    labels.append(("lambda1-time", None))
    for j in range(d):
        modes.append(symmetry_mode("lambda1-space", d, j))
        labels.append(("lambda1-space", j))
    return modes, labels


# ---------------------------------------------------------------------------
# parameter-derivative modes


class _VThetaJet(Jet):
    """v_Theta as a jet: exact value and Jacobian, higher derivatives by
    Richardson finite differences of the exact Jacobian."""

    def __init__(self, theta, h=1e-4):
        self.theta = theta
        self.d = theta.d
        self.m = theta.d
        self.h = h

    def ev(self, pts, alpha=None):
        pts = np.asarray(pts, dtype=float)
        d = self.d
        if alpha is None or sum(alpha) == 0:
            return v_theta(pts, self.theta).astype(complex)
        if sum(alpha) == 1:
            j = int(np.argmax(alpha))
            return v_theta_jacobian(pts, self.theta)[:, :, j].astype(complex)
        # reduce: differentiate the (|alpha|-1)-jet in one direction by
        # Richardson-extrapolated central differences
        j = int(np.argmax(np.asarray(alpha) > 0))
        rest = list(alpha)
        rest[j] -= 1
        rest = tuple(rest)
        e = np.zeros(d)
        e[j] = 1.0

        def cd(h):
            return (self.ev(pts + h * e, rest) - self.ev(pts - h * e, rest)) / (2 * h)

        h = self.h
        return (4.0 * cd(h / 2) - cd(h)) / 3.0


def vtheta_pair(theta):
    """The static profile pair (v_Theta, Lambda v_Theta) at jet level."""
    v = _VThetaJet(theta)
    return PairJet(v, LambdaJet(v))


class _ThetaDerivJet(Jet):
    """d/dTheta^a of v_Theta as a jet (Richardson central difference in the
    parameter, step 1e-5; each evaluation uses the exact xi-jets)."""

    def __init__(self, theta, a, h=1e-5):
        self.theta = theta
        self.a = a
        self.d = theta.d
        self.m = theta.d
        self.h = h

    def _shifted(self, s):
        v = self.theta.to_flat().copy()
        v[self.a] += s
        return _VThetaJet(SymmetryParams.from_flat(v, self.d))

    def ev(self, pts, alpha=None):
        def cd(h):
            return (self._shifted(h).ev(pts, alpha)
                    - self._shifted(-h).ev(pts, alpha)) / (2 * h)

        h = self.h
        return (4.0 * cd(h / 2) - cd(h)) / 3.0


def parameter_modes(theta):
    """The p(d) + d + 1 parameter-derivative fields at Theta.

    Order: time-translation mode f^1_0, the d space-translation modes f^1_j,
    then the p(d) parameter modes f^0_a = d/dTheta^a (v_0^{1,0} - v_Theta).
    Returns (modes, labels).
    """
    d = theta.d
    s = 1.0 / np.sqrt(d - 2.0)
    modes = []
    labels = []
    # f^1_0 = d/dT (v_0^{T,0} - v_Theta) at T=1: (xi, 2 xi)/sqrt(d-2)
    f1 = PolyJet(d, [{_unit(d, n): s} for n in range(d)])
    f2 = PolyJet(d, [{_unit(d, n): 2.0 * s} for n in range(d)])
    modes.append(PairJet(f1, f2))
    labels.append(("param-T", None))
    for j in range(d):
        zero = (0,) * d
        g1 = _poly_e(d, j, {zero: s})
        g2 = _poly_e(d, j, {zero: s})
        modes.append(PairJet(g1, g2))
        labels.append(("param-X", j))
    for a in range(p_of_d(d)):
        dv = _ThetaDerivJet(theta, a)
        modes.append(PairJet(dv, LambdaJet(dv)) * (-1.0))
        labels.append(("param-Theta", a))
    return modes, labels
