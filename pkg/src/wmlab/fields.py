"""Exact-jet field machinery.

Smooth test fields on the ball are represented as objects that can evaluate any
partial derivative d^alpha exactly at arbitrary point sets.  This is what makes
the quadrature-based Sobolev inner products and the dissipativity sampling
independent of finite-difference stencils: the only error left is quadrature.

A field has m components and lives on R^d.  `ev(pts, alpha)` returns the exact
derivative d^alpha f at pts (shape (npts, m)).  Atoms are trigonometric waves
(a * exp(i k.xi)) and polynomials; combinators implement sums, derivatives,
the scaling field Lambda = xi.grad, the angular operator K, the Laplacian, and
multiplication by scalar coefficient functions with known derivative jets.

Multi-index conventions: alpha is a length-d tuple of non-negative ints.
"""

import itertools
import math

import numpy as np


# ---------------------------------------------------------------------------
# multi-index helpers

def multi_indices(d, order):
    """All multi-indices of R^d with |alpha| == order, lexicographic."""
    if order == 0:
        return [(0,) * d]
    out = []
    for c in itertools.combinations_with_replacement(range(d), order):
        alpha = [0] * d
        for j in c:
            alpha[j] += 1
        out.append(tuple(alpha))
    return out


def multi_indices_upto(d, order):
    out = []
    for k in range(order + 1):
        out.extend(multi_indices(d, k))
    return out


def multinomial(order, alpha):
    """Number of ordered (i_1..i_order) tuples collapsing to alpha."""
    num = math.factorial(order)
    for a in alpha:
        num //= math.factorial(a)
    return num


def _sub_indices(alpha):
    """All beta <= alpha componentwise."""
    ranges = [range(a + 1) for a in alpha]
    return [tuple(b) for b in itertools.product(*ranges)]


def _binom_mi(alpha, beta):
    out = 1
    for a, b in zip(alpha, beta):
        out *= math.comb(a, b)
    return out


def _add(alpha, beta):
    return tuple(a + b for a, b in zip(alpha, beta))


def _sub(alpha, beta):
    return tuple(a - b for a, b in zip(alpha, beta))


def _unit(d, j, n=1):
    e = [0] * d
    e[j] = n
    return tuple(e)


# ---------------------------------------------------------------------------
# scalar coefficient functions with derivative jets

class ScalarCoeff:
    """Scalar function c(xi) with exact derivatives; base class."""

    def ev(self, pts, alpha):
        raise NotImplementedError

    def __mul__(self, other):
        return ProductCoeff(self, other) if isinstance(other, ScalarCoeff) \
            else AffineCoeff(0.0, other, self)

    __rmul__ = __mul__


class PolyCoeff(ScalarCoeff):
    """Polynomial scalar, terms = {multi-index: coefficient}."""

    def __init__(self, d, terms):
        self.d = d
        self.terms = dict(terms)

    def ev(self, pts, alpha):
        pts = np.asarray(pts)
        out = np.zeros(pts.shape[0], dtype=complex)
        for mono, c in self.terms.items():
            fac = c
            ok = True
            new = []
            for mj, aj in zip(mono, alpha):
                if aj > mj:
                    ok = False
                    break
                fac *= math.perm(mj, aj)
                new.append(mj - aj)
            if not ok:
                continue
            term = np.full(pts.shape[0], fac, dtype=complex)
            for j, p in enumerate(new):
                if p:
                    term = term * pts[:, j] ** p
            out += term
        return out


class RadialReciprocal(ScalarCoeff):
    """phi(xi) = 1/(a + |xi|^2), derivatives by the exact recursion

        (a+r^2) d^alpha phi = -2 sum_j alpha_j xi_j d^{alpha-e_j} phi
                              - sum_j alpha_j (alpha_j - 1) d^{alpha-2e_j} phi.
    """

    def __init__(self, d, a):
        self.d = d
        self.a = float(a)

    def ev(self, pts, alpha):
        pts = np.asarray(pts, dtype=float)
        denom = self.a + np.sum(pts**2, axis=1)
        cache = {}

        def rec(al):
            if al in cache:
                return cache[al]
            if sum(al) == 0:
                val = 1.0 / denom
            else:
                acc = np.zeros(pts.shape[0])
                for j, aj in enumerate(al):
                    if aj >= 1:
                        acc += 2.0 * aj * pts[:, j] * rec(_sub(al, _unit(self.d, j)))
                    if aj >= 2:
                        acc += aj * (aj - 1) * rec(_sub(al, _unit(self.d, j, 2)))
                val = -acc / denom
            cache[al] = val
            return val

        return rec(tuple(alpha)).astype(complex)


class AffineCoeff(ScalarCoeff):
    """c0 + c1 * inner, with constant c0, c1."""

    def __init__(self, c0, c1, inner):
        self.c0 = c0
        self.c1 = c1
        self.inner = inner

    def ev(self, pts, alpha):
        out = self.c1 * self.inner.ev(pts, alpha)
        if sum(alpha) == 0:
            out = out + self.c0
        return out


class ProductCoeff(ScalarCoeff):
    def __init__(self, a, b):
        self.a = a
        self.b = b

    def ev(self, pts, alpha):
        out = 0.0
        for beta in _sub_indices(alpha):
            out = out + _binom_mi(alpha, beta) * self.a.ev(pts, beta) \
                * self.b.ev(pts, _sub(alpha, beta))
        return out


# ---------------------------------------------------------------------------
# vector fields with jets

class Jet:
    """m-component field with exact derivative evaluation."""

    m = None  # number of components
    d = None  # base dimension

    def ev(self, pts, alpha=None):
        raise NotImplementedError

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other):
        return SumJet([self, other], [1.0, 1.0])

    def __sub__(self, other):
        return SumJet([self, other], [1.0, -1.0])

    def __mul__(self, c):
        return SumJet([self], [c])

    __rmul__ = __mul__

    def __neg__(self):
        return SumJet([self], [-1.0])

    def deriv(self, beta):
        return DerivJet(self, beta)

    def _zero_alpha(self):
        return (0,) * self.d


class ZeroJet(Jet):
    def __init__(self, d, m):
        self.d = d
        self.m = m

    def ev(self, pts, alpha=None):
        return np.zeros((np.asarray(pts).shape[0], self.m), dtype=complex)


class TrigJet(Jet):
    """Sum of plane waves: f(xi) = sum_w a_w exp(i k_w . xi)."""

    def __init__(self, d, terms):
        self.d = d
        self.terms = [(np.asarray(a, dtype=complex), np.asarray(k, dtype=float))
                      for a, k in terms]
        self.m = self.terms[0][0].shape[0]

    @classmethod
    def random_real(cls, d, m, n_waves, kmax, rng):
        """Real-valued random trigonometric field (wave + conjugate pairs)."""
        terms = []
        for _ in range(n_waves):
            a = rng.standard_normal(m) + 1j * rng.standard_normal(m)
            k = rng.integers(-kmax, kmax + 1, size=d).astype(float)
            terms.append((0.5 * a, k))
            terms.append((0.5 * np.conj(a), -k))
        return cls(d, terms)

    @classmethod
    def random_complex(cls, d, m, n_waves, kmax, rng):
        terms = []
        for _ in range(n_waves):
            a = rng.standard_normal(m) + 1j * rng.standard_normal(m)
            k = rng.integers(-kmax, kmax + 1, size=d).astype(float)
            terms.append((a, k))
        return cls(d, terms)

    def ev(self, pts, alpha=None):
        pts = np.asarray(pts, dtype=float)
        if alpha is None:
            alpha = (0,) * self.d
        out = np.zeros((pts.shape[0], self.m), dtype=complex)
        for a, k in self.terms:
            fac = 1.0 + 0.0j
            for kj, aj in zip(k, alpha):
                if aj:
                    fac *= (1j * kj) ** aj
            if fac == 0.0:
                continue
            phase = np.exp(1j * (pts @ k))
            out += np.outer(phase, fac * a)
        return out


class PolyJet(Jet):
    """Componentwise polynomial field; comps is a list of {multi-index: coeff}."""

    def __init__(self, d, comps):
        self.d = d
        self.m = len(comps)
        self.coeffs = [PolyCoeff(d, c) for c in comps]

    def ev(self, pts, alpha=None):
        pts = np.asarray(pts, dtype=float)
        if alpha is None:
            alpha = (0,) * self.d
        cols = [c.ev(pts, alpha) for c in self.coeffs]
        return np.stack(cols, axis=1)


class SumJet(Jet):
    def __init__(self, jets, weights):
        self.jets = jets
        self.weights = weights
        self.d = jets[0].d
        self.m = jets[0].m

    def ev(self, pts, alpha=None):
        out = None
        for w, j in zip(self.weights, self.jets):
            term = w * j.ev(pts, alpha)
            out = term if out is None else out + term
        return out


class DerivJet(Jet):
    def __init__(self, base, beta):
        self.base = base
        self.beta = tuple(beta)
        self.d = base.d
        self.m = base.m

    def ev(self, pts, alpha=None):
        if alpha is None:
            alpha = (0,) * self.d
        return self.base.ev(pts, _add(alpha, self.beta))


class LambdaJet(Jet):
    """Lambda f = xi . grad f; d^alpha(Lambda f) = Lambda(d^alpha f) + |alpha| d^alpha f."""

    def __init__(self, base):
        self.base = base
        self.d = base.d
        self.m = base.m

    def ev(self, pts, alpha=None):
        pts = np.asarray(pts, dtype=float)
        if alpha is None:
            alpha = (0,) * self.d
        out = sum(alpha) * self.base.ev(pts, alpha) if sum(alpha) else 0.0
        for j in range(self.d):
            dj = self.base.ev(pts, _add(alpha, _unit(self.d, j)))
            out = out + pts[:, j:j + 1] * dj
        return out


class LaplacianJet(Jet):
    def __init__(self, base):
        self.base = base
        self.d = base.d
        self.m = base.m

    def ev(self, pts, alpha=None):
        if alpha is None:
            alpha = (0,) * self.d
        out = None
        for j in range(self.d):
            term = self.base.ev(pts, _add(alpha, _unit(self.d, j, 2)))
            out = term if out is None else out + term
        return out


class KJet(Jet):
    """(K f)^n = xi^n d_j f^j - xi_j d^n f^j (sum over j), for d-component f.

    d^alpha(xi_p g) = xi_p d^alpha g + alpha_p d^{alpha - e_p} g.
    """

    def __init__(self, base):
        if base.m != base.d:
            raise ValueError("K acts on d-component fields")
        self.base = base
        self.d = base.d
        self.m = base.d

    def ev(self, pts, alpha=None):
        pts = np.asarray(pts, dtype=float)
        d = self.d
        if alpha is None:
            alpha = (0,) * d
        npts = pts.shape[0]
        out = np.zeros((npts, d), dtype=complex)
        # div-like part: (xi^n) * sum_j d_j f^j
        divs = np.zeros(npts, dtype=complex)
        for j in range(d):
            divs += self.base.ev(pts, _add(alpha, _unit(d, j)))[:, j]
        out += pts * divs[:, None]
        for n in range(d):
            if alpha[n] >= 1:
                al = _sub(alpha, _unit(d, n))
                s = np.zeros(npts, dtype=complex)
                for j in range(d):
                    s += self.base.ev(pts, _add(al, _unit(d, j)))[:, j]
                out[:, n] += alpha[n] * s
        # second part: - xi_j d^n f^j - Leibniz correction
        for n in range(d):
            dn = self.base.ev(pts, _add(alpha, _unit(d, n)))
            out[:, n] -= np.sum(pts * dn, axis=1)
            for j in range(d):
                if alpha[j] >= 1:
                    al = _sub(alpha, _unit(d, j))
                    out[:, n] -= alpha[j] * self.base.ev(pts, _add(al, _unit(d, n)))[:, j]
        return out


class CoeffJet(Jet):
    """c(xi) * f with scalar coefficient jet; Leibniz rule."""

    def __init__(self, coeff, base):
        self.coeff = coeff
        self.base = base
        self.d = base.d
        self.m = base.m

    def ev(self, pts, alpha=None):
        if alpha is None:
            alpha = (0,) * self.d
        out = None
        for beta in _sub_indices(alpha):
            c = self.coeff.ev(pts, beta)
            g = self.base.ev(pts, _sub(alpha, beta))
            term = _binom_mi(alpha, beta) * c[:, None] * g
            out = term if out is None else out + term
        return out


# ---------------------------------------------------------------------------
# pairs (the first-order state)

class PairJet:
    """A CylinderField at jet level: pair (f1, f2) of d-component fields."""

    def __init__(self, f1, f2):
        if f1.d != f2.d or f1.m != f2.m:
            raise ValueError("pair components must match")
        self.f1 = f1
        self.f2 = f2
        self.d = f1.d
        self.m = f1.m

    def __add__(self, other):
        return PairJet(self.f1 + other.f1, self.f2 + other.f2)

    def __sub__(self, other):
        return PairJet(self.f1 - other.f1, self.f2 - other.f2)

    def __mul__(self, c):
        return PairJet(c * self.f1, c * self.f2)

    __rmul__ = __mul__

    def deriv(self, beta):
        return PairJet(self.f1.deriv(beta), self.f2.deriv(beta))

    @classmethod
    def zero(cls, d, m=None):
        m = d if m is None else m
        return cls(ZeroJet(d, m), ZeroJet(d, m))

    @classmethod
    def random_real(cls, d, n_waves, kmax, rng):
        return cls(TrigJet.random_real(d, d, n_waves, kmax, rng),
                   TrigJet.random_real(d, d, n_waves, kmax, rng))

    @classmethod
    def random_complex(cls, d, n_waves, kmax, rng):
        return cls(TrigJet.random_complex(d, d, n_waves, kmax, rng),
                   TrigJet.random_complex(d, d, n_waves, kmax, rng))
