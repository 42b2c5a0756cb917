"""Acceptance gate: the eleven quantitative criteria, one verdict line each.

Each test prints a single PASS/FAIL line (with its wall time); the lines are
also replayed in the terminal summary, so a full run always ends with the
complete scoreboard even under output capture.
"""

import sys
import time

import numpy as np
import pytest

import conftest

from wmlab import evolution, geometry, modes, norms, operators, symmetry
from wmlab.ballgrid import BallGrid
from wmlab.cubegrid import CubeGrid
from wmlab.evolution import AmplitudeTracker, BlowupFrame, GramDualBasis
from wmlab.operators import GridPair
from wmlab.symmetry import SymmetryParams


def verdict(num, name, ok, elapsed, detail):
    line = "CRITERION %2d %-28s %s  [%6.1fs]  %s" % (
        num, name, "PASS" if ok else "FAIL", elapsed, detail)
    print(line, file=sys.__stdout__, flush=True)
    conftest.VERDICTS.append(line)
    assert ok, line


# ---------------------------------------------------------------------------
# 1. finite-difference wave-map residual of the exact solutions

def test_criterion_01_exact_solution_residual():
    t0 = time.time()
    d = 3
    rng = np.random.default_rng(2024)

    def cases():
        yield lambda t, x: geometry.u_star(t, x, d)
        for _ in range(5):
            T = 1.0 + rng.uniform(-0.05, 0.05)
            X = rng.uniform(-0.05, 0.05, d)
            th = SymmetryParams.random(d, 0.05, rng)
            yield (lambda t, x, T=T, X=X, th=th:
                   symmetry.u_theta(t, x, T, X, th, d))

    def sample_points(m=4):
        for _ in range(m):
            t = rng.uniform(0.0, 0.1)
            u = rng.standard_normal(d)
            yield t, u / np.linalg.norm(u) * rng.uniform(0.4, 0.8)

    hs = [4e-3, 2e-3, 1e-3]
    worst_size, worst_dev = 0.0, 0.0
    for U in cases():
        pts = list(sample_points())
        sups = [max(np.max(np.abs(geometry.wavemap_residual(U, t, x, h, d)))
                    for t, x in pts) for h in hs]
        orders = [np.log2(sups[i] / sups[i + 1]) for i in range(len(hs) - 1)]
        worst_dev = max(worst_dev, abs(float(np.mean(orders)) - 2.0))
        worst_size = max(worst_size, sups[-1])
    el = time.time() - t0
    ok = worst_dev <= 0.3 and worst_size <= 1e-5 and el < 10.0
    verdict(1, "exact-solution residual", ok, el,
            "order dev %.3f (<=0.3), size %.2e (<=1e-5)"
            % (worst_dev, worst_size))


# ---------------------------------------------------------------------------
# 2. chart identity

def test_criterion_02_chart_identity():
    t0 = time.time()
    rng = np.random.default_rng(7)
    worst = 0.0
    for d in (3, 4, 5):
        xi = rng.standard_normal((1000, d)) * 2.0
        err = np.max(np.abs(geometry.stereo(geometry.v_star(xi, d))
                            - xi / np.sqrt(d - 2.0)))
        worst = max(worst, float(err))
    el = time.time() - t0
    ok = worst <= 1e-12 and el < 1.0
    verdict(2, "chart identity", ok, el, "max err %.2e (<=1e-12)" % worst)


# ---------------------------------------------------------------------------
# 3. static profile on the grid

def test_criterion_03_static_solution():
    t0 = time.time()
    d = 3
    g = CubeGrid(d, 48)
    rng = np.random.default_rng(5)
    worst = 0.0
    for i in range(4):
        th = SymmetryParams.zero(d) if i == 0 else \
            SymmetryParams.random(d, 0.05, rng)
        rep = operators.static_residual_report(th, g)
        worst = max(worst, rep["ratio"])
    el = time.time() - t0
    ok = worst <= 10.0 and el < 30.0
    verdict(3, "static profile residual", ok, el,
            "worst ratio %.2f (<=10)" % worst)


# ---------------------------------------------------------------------------
# 4. dissipative estimates

def test_criterion_04_dissipativity():
    t0 = time.time()
    d = 3
    grid = BallGrid(d, 10)
    tol = norms.measure_tol_disc(1, d, 100, grid, seed=0)
    details = []
    ok = tol <= 0.05
    rep = norms.dissipativity_sample(1, d, 100, grid, seed=0)
    ok = ok and rep.empirical <= 0.5 + tol
    details.append("H1 %.3f<=%.3f" % (rep.empirical, 0.5 + tol))
    for k in (2, 3):
        tolk = norms.measure_tol_disc(k, d, 100, grid, seed=0,
                                      homogeneous=True)
        ok = ok and tolk <= 0.05
        repk = norms.dissipativity_sample(k, d, 100, grid, seed=0,
                                          homogeneous=True)
        bound = d / 2.0 - k + tolk
        ok = ok and repk.empirical <= bound
        details.append("Hdot%d %.3f<=%.3f" % (k, repk.empirical, bound))
    el = time.time() - t0
    ok = ok and el < 120.0
    verdict(4, "dissipative estimates", ok, el, ", ".join(details))


# ---------------------------------------------------------------------------
# 5. K-eigenvalues

def test_criterion_05_K_eigenvalues():
    t0 = time.time()
    rng = np.random.default_rng(3)
    worst = 0.0
    for d, n in ((3, 16), (4, 16), (5, 12)):
        g = CubeGrid(d, n)
        mask = g.ball_mask
        shp = (n,) * d + (d,)
        const = np.broadcast_to(rng.standard_normal(d), shp).copy()
        A = rng.standard_normal((d, d))
        A = A - A.T
        rot = np.einsum("nj,...j->...n", A, g.xi)
        for f, lam in ((const, 0.0), (rot, 1.0), (g.xi.copy(), d - 1.0)):
            dev = np.max(np.abs((operators.apply_K(g, f) - lam * f)[mask]))
            worst = max(worst, float(dev))
    el = time.time() - t0
    ok = worst <= 1e-10 and el < 1.0
    verdict(5, "K-eigenvalues {0,1,d-1}", ok, el,
            "max defect %.2e (<=1e-10)" % worst)


# ---------------------------------------------------------------------------
# 6. explicit eigenprofiles

def test_criterion_06_eigenprofiles():
    t0 = time.time()
    worst = 0.0
    for d in (3, 4, 5, 6):
        for kind in modes.EIGENPROFILES:
            _, rep = modes.eigenprofile(kind, d, n_cheb=64)
            worst = max(worst, rep["max_residual"] / max(rep["scale"], 1.0))
    el = time.time() - t0
    ok = worst <= 1e-10 and el < 5.0
    verdict(6, "eigenprofile residuals", ok, el,
            "max rel residual %.2e (<=1e-10)" % worst)


# ---------------------------------------------------------------------------
# 7. mode-stability scan

def _expected_zeros(d, ell, m):
    out = []
    if ell == 0:
        out = [0.0, 1.0]
    elif (ell, m) == (1, 1):
        out = [0.0]
    elif (ell, m) == (1, d - 1):
        out = [1.0]
    elif (ell, m) == (2, d):
        out = [0.0]
    return out


def _scan_matches(scan, d, tol=1e-6):
    for entry in scan["modes"]:
        want = _expected_zeros(d, entry["ell"], entry["m"])
        got = entry["zeros"]
        if len(got) != len(want):
            return False, "(%d,%s): %d zeros, expected %d" % (
                entry["ell"], entry["m"], len(got), len(want))
        for z, w in zip(got, sorted(want)):
            if abs(complex(z["re"], z["im"]) - w) > tol:
                return False, "(%d,%s): zero at %.8f%+.8fj" % (
                    entry["ell"], entry["m"], z["re"], z["im"])
            if z["multiplicity"] != 1:
                return False, "(%d,%s): multiplicity %d" % (
                    entry["ell"], entry["m"], z["multiplicity"])
    return True, ""


def test_criterion_07_mode_stability_scan():
    t0 = time.time()
    rect = (-0.4, 2.5, -8.0, 8.0)
    ok, detail = True, []
    for d in (3, 4):
        scan = modes.mode_scan(d, 4, rect)
        good, why = _scan_matches(scan, d)
        ok = ok and good
        detail.append("d=%d %s" % (d, "exact pattern" if good else why))
    # contour-perturbation stability
    scan_p = modes.mode_scan(3, 4, (-0.41, 2.52, -8.1, 8.05))
    good, why = _scan_matches(scan_p, 3)
    ok = ok and good
    detail.append("contour-shift %s" % ("stable" if good else why))
    # matching-point stability on every family with a zero
    for rho_star in (0.45, 0.55):
        for (ell, m, want) in ((0, None, [0.0, 1.0]), (1, 1, [0.0]),
                               (1, 2, [1.0]), (2, 3, [0.0])):
            z = modes.mode_scan_one(3, ell, m, rect, rho_star=rho_star)
            good = (len(z) == len(want)
                    and all(abs(complex(a["re"], a["im"]) - w) <= 1e-6
                            for a, w in zip(z, want)))
            ok = ok and good
    detail.append("matching-point stable")
    el = time.time() - t0
    ok = ok and el < 600.0
    verdict(7, "mode-stability scan", ok, el, "; ".join(detail))


# ---------------------------------------------------------------------------
# 8. multiplicity machinery

def test_criterion_08_multiplicity_machinery():
    import sympy as sp
    t0 = time.time()
    ok, detail = True, []
    # d = 3 obstruction integrals, strictly negative
    for case in ("(1,1,d-1)", "(1,0)"):
        rep = modes.generalized_mode_check(case, 3)
        ch = rep["checks"]["obstruction_integral"]
        ok = ok and ch["passed"] and ch["value"] < -1e-3
        detail.append("%s int %.4f" % (case, ch["value"]))
    # g-identities for all cases, d in {3..7}
    worst_g = 0.0
    grid = np.linspace(0.05, 0.95, 61)
    for case in modes.CASES:
        for d in range(3, 8):
            rho, lam, h0, g, _ = modes._case_symbols(case, d)
            ident = g + (2 * lam + 1) * h0 + 2 * rho * sp.diff(h0, rho)
            vals = sp.lambdify(rho, ident, "numpy")(grid) + 0.0 * grid
            worst_g = max(worst_g, float(np.max(np.abs(vals))))
    ok = ok and worst_g <= 1e-12
    detail.append("g-id %.1e" % worst_g)
    # SUSY-transformed ODE residuals, cases (0,0) and (1,0), d in {4,5}
    worst_s = 0.0
    for case in ("(0,0)", "(1,0)"):
        for d in (4, 5):
            comp = modes.susy_companion(case, d)
            resid = comp["d2h"] + comp["p"] * comp["dh"] \
                + comp["Vt"] * comp["h"]
            scale = np.max(np.abs(comp["d2h"]) + np.abs(comp["p"] * comp["dh"])
                           + np.abs(comp["Vt"] * comp["h"]))
            worst_s = max(worst_s, float(np.max(np.abs(resid)) / scale))
    ok = ok and worst_s <= 1e-8
    detail.append("susy %.1e" % worst_s)
    el = time.time() - t0
    ok = ok and el < 60.0
    verdict(8, "multiplicity machinery", ok, el, ", ".join(detail))


# ---------------------------------------------------------------------------
# 9. linear eigen-dynamics

def test_criterion_09_linear_eigen_dynamics():
    t0 = time.time()
    d = 3
    eps = 1e-6
    th = SymmetryParams.zero(d)
    basis = GramDualBasis(th, 1, BallGrid(d, 12))
    translation = symmetry.symmetry_mode("lambda0-translation", d, 0)
    a_tr = basis.amplitudes_jet(translation)
    slot_tr = int(np.argmax(np.abs(a_tr)))
    defects = {}
    for n in (48, 64):
        g = CubeGrid(d, n)
        tracker = AmplitudeTracker(basis, g)
        for name, mode, slot, lam in (
                ("lam1", basis.modes[0], 0, 1.0),
                ("lam0", translation, slot_tr, 0.0)):
            u0 = GridPair.from_jet(g, mode * eps)
            trace = evolution.evolve(u0, th, 1.0, grid=g, basis=basis,
                                     tracker=tracker, record_every=4)
            taus = np.array(trace.taus)
            amps = trace.amplitude_matrix()[:, slot]
            pred = amps[0] * np.exp(lam * taus)
            defects[(name, n)] = float(np.max(np.abs(amps / pred - 1.0)))
    ok = all(defects[(nm, 48)] <= 0.02 for nm in ("lam1", "lam0"))
    # refinement: the defect halves unless already at the nonlinear floor
    floor = 10.0 * eps
    for nm in ("lam1", "lam0"):
        ok = ok and defects[(nm, 64)] <= max(defects[(nm, 48)] / 1.6, floor)
    el = time.time() - t0
    ok = ok and el < 300.0
    verdict(9, "linear eigen-dynamics", ok, el,
            "lam1 %.1e->%.1e, lam0 %.1e->%.1e (2%% cap, halving/floor)"
            % (defects[("lam1", 48)], defects[("lam1", 64)],
               defects[("lam0", 48)], defects[("lam0", 64)]))


# ---------------------------------------------------------------------------
# 10. nonlinear stability property run

def test_criterion_10_nonlinear_stability():
    t0 = time.time()
    d = 3
    eps = 1e-3
    g48 = CubeGrid(d, 48)
    box = 0.1
    ok, detail = True, []
    first = None
    for seed in (101, 102, 103):
        f = evolution.sphere_perturbation_data(d, eps, seed=seed)
        res = evolution.fit_blowup_parameters(f, g48, box_delta=box,
                                              tau_max=6.0)
        in_box = (abs(res.T - 1.0) <= box
                  and np.linalg.norm(res.X) <= box
                  and res.theta.norm() <= box)
        rep = evolution.decay_report(res.trace)
        ok = ok and res.success and in_box and rep["eps_fit"] > 0.0
        detail.append("s%d eps_fit %.3f" % (seed, rep["eps_fit"]))
        if first is None:
            first = res
    # grid doubling on the first seed: re-evolve the fitted data at n=96 and
    # compare the decay rate over the common tau-window
    tau_c = 3.5
    tr48 = first.trace
    short = evolution.EvolutionTrace(tr48.labels, tr48.lams)
    for i, tau in enumerate(tr48.taus):
        if tau <= tau_c + 1e-9:
            short.add(tau, tr48.norm_h1[i], tr48.norm_hk[i], tr48.amps[i],
                      tr48.stable_norm[i])
    eps48 = evolution.decay_report(short)["eps_fit"]
    g96 = CubeGrid(d, 96)
    f = evolution.sphere_perturbation_data(d, eps, seed=101)
    basis = GramDualBasis(first.theta, 1, BallGrid(d, 12))
    u0 = evolution.initial_data(f, first.frame, first.theta, g96)
    tr96 = evolution.evolve(u0, first.theta, tau_c, grid=g96, basis=basis,
                            record_every=8)
    eps96 = evolution.decay_report(tr96)["eps_fit"]
    rel = abs(eps96 - eps48) / eps48
    ok = ok and rel <= 0.10
    detail.append("doubling %.3f->%.3f (%.1f%%)" % (eps48, eps96, 100 * rel))
    el = time.time() - t0
    ok = ok and el < 1800.0
    verdict(10, "nonlinear stability fits", ok, el, ", ".join(detail))


# ---------------------------------------------------------------------------
# 11. Taylor identities and N-scaling

def test_criterion_11_taylor_and_N_scaling():
    t0 = time.time()
    rng = np.random.default_rng(11)
    m, kk = 5, 4
    A = rng.standard_normal((kk, m))
    B = rng.standard_normal((kk, m, m))
    B = 0.5 * (B + np.swapaxes(B, 1, 2))

    def F(x):
        return A @ x + np.einsum("kab,a,b->k", B, x, x)

    def dF(x):
        return A + 2.0 * np.einsum("kab,b->ka", B, x)

    def d2F(x):
        return 2.0 * B

    dq, dd = operators.taylor_identity_check(
        F, rng.standard_normal(m), rng.standard_normal(m),
        rng.standard_normal(m), rng.standard_normal(m), dF=dF, d2F=d2F)
    ok = dq <= 1e-10 and dd <= 1e-10
    # N_Theta quadratic scaling on random chart data
    d = 3
    th = SymmetryParams.random(d, 0.05, rng)
    pts = rng.uniform(-0.7, 0.7, (30, d))
    f1 = rng.standard_normal((30, d))
    df1 = rng.standard_normal((30, d, d))
    f2 = rng.standard_normal((30, d))
    eps_list = np.array([1e-2, 1e-3, 1e-4])
    nn = [np.max(np.abs(operators.nonlinearity_N_values(
        th, pts, e * f1, e * df1, e * f2))) for e in eps_list]
    slope = float(np.polyfit(np.log(eps_list), np.log(nn), 1)[0])
    ok = ok and abs(slope - 2.0) <= 0.1
    el = time.time() - t0
    ok = ok and el < 60.0
    verdict(11, "Taylor identities, N-scaling", ok, el,
            "defects %.1e/%.1e (<=1e-10), slope %.3f (2+-0.1)"
            % (dq, dd, slope))
