"""Time integration in similarity variables and the amplitude bookkeeping."""

import numpy as np
import pytest

from wmlab import evolution, symmetry
from wmlab.ballgrid import BallGrid
from wmlab.cubegrid import CubeGrid
from wmlab.evolution import (AmplitudeTracker, BlowupDetected, BlowupFrame,
                             EvolutionSystem, EvolutionTrace, GramDualBasis)
from wmlab.operators import GridPair
from wmlab.symmetry import SymmetryParams


D = 3
THETA0 = SymmetryParams.zero(D)
BALL = BallGrid(D, 12)


@pytest.fixture(scope="module")
def basis():
    return GramDualBasis(THETA0, 1, BALL)


# ---------------------------------------------------------------------------
# the background is an exact discrete fixed point

def test_zero_is_fixed_point():
    g = CubeGrid(D, 24)
    sys = EvolutionSystem(g, THETA0)
    rhs = sys.rhs(GridPair.zero(g))
    assert np.max(np.abs(rhs.f1)) < 1e-13
    assert np.max(np.abs(rhs.f2)) < 1e-13


def test_zero_data_evolves_to_zero(basis):
    g = CubeGrid(D, 24)
    trace = evolution.evolve(GridPair.zero(g), THETA0, 0.5, grid=g,
                             basis=basis, record_every=2)
    assert max(trace.norm_h1) < 1e-12
    assert np.max(np.abs(trace.amplitude_matrix())) < 1e-12


# ---------------------------------------------------------------------------
# RK4 self-convergence

def test_rk4_fourth_order(basis):
    g = CubeGrid(D, 16)
    u0 = GridPair.from_jet(g, basis.modes[0] * 1e-2)
    tau = 0.2

    def final(dtau):
        tr = evolution.evolve(u0, THETA0, tau, grid=g, dtau=dtau,
                              record_every=10**6)
        return tr.final_state.field

    ua = final(tau / 8)
    ub = final(tau / 16)
    uref = final(tau / 64)
    ea = np.max(np.abs(ua.f2 - uref.f2))
    eb = np.max(np.abs(ub.f2 - uref.f2))
    order = np.log2(ea / eb)
    assert 3.7 <= order <= 4.5


# ---------------------------------------------------------------------------
# dual basis and amplitude extraction

def test_biorthogonality(basis):
    assert basis.biorthogonality_defect() <= 1e-8
    assert basis.n_modes == symmetry.p_of_d(D) + D + 1
    assert basis.lams[0] == 1.0
    assert np.all(basis.lams[1:1 + D] == 1.0)
    assert np.all(basis.lams[1 + D:] == 0.0)


def test_jet_amplitudes_pick_out_single_modes(basis):
    for b in (0, 2, 5, 9):
        a = basis.amplitudes_jet(basis.modes[b] * 1e-3)
        want = np.zeros(basis.n_modes)
        want[b] = 1e-3
        assert np.max(np.abs(a - want)) < 1e-12


def test_grid_amplitudes_match_jet_amplitudes(basis):
    g = CubeGrid(D, 32)
    tracker = AmplitudeTracker(basis, g)
    for b in (0, 4, 10):
        u = GridPair.from_jet(g, basis.modes[b] * 1e-3)
        a = tracker.amplitudes(u)
        want = np.zeros(basis.n_modes)
        want[b] = 1e-3
        # cubic resampling of the grid data limits the accuracy here
        assert np.max(np.abs(a - want)) < 1e-8


# ---------------------------------------------------------------------------
# initial data map

def test_initial_data_trivial_at_reference():
    g = CubeGrid(D, 16)
    u0 = evolution.initial_data(None, BlowupFrame(1.0, np.zeros(D)), THETA0, g)
    assert np.max(np.abs(u0.f1)) < 1e-14
    assert np.max(np.abs(u0.f2)) < 1e-14


def test_frame_admissibility():
    with pytest.raises(ValueError):
        BlowupFrame(1.5, np.array([0.6, 0.3, 0.0]))  # |X| + T > 2


def test_initial_data_first_order_taylor(basis):
    """u(0) for f = 0 matches eps * (parameter modes) to O(eps^2)."""
    g = CubeGrid(D, 32)
    tracker = AmplitudeTracker(basis, g)
    eps = 1e-3
    rng = np.random.default_rng(8)
    q = rng.standard_normal(basis.n_modes)
    q /= np.linalg.norm(q)
    frame = BlowupFrame(1.0 + eps * q[0], eps * q[1:1 + D])
    theta = SymmetryParams.from_flat(eps * q[1 + D:], D)
    u0 = evolution.initial_data(None, frame, theta, g)
    a = tracker.amplitudes(u0)
    assert np.max(np.abs(a - eps * q)) <= 1e-5
    # the part outside the mode span is second order as well
    _, _, _, stable = tracker.record(u0)
    assert stable <= 1e-5


# ---------------------------------------------------------------------------
# sphere-valued perturbations

def test_sphere_perturbation_scales_with_eps():
    g = CubeGrid(D, 16)
    pts = g.points()
    f_small = evolution.sphere_perturbation_data(D, 1e-4, seed=3)
    f_big = evolution.sphere_perturbation_data(D, 1e-3, seed=3)
    # f1 returns the chart perturbation with the background removed
    dev_small = np.max(np.abs(f_small.f1(pts)))
    dev_big = np.max(np.abs(f_big.f1(pts)))
    assert 0.0 < dev_small < 1e-3
    assert 5.0 < dev_big / dev_small < 20.0  # linear in eps to leading order


# ---------------------------------------------------------------------------
# linear eigen-dynamics (short, coarse version of the acceptance run)

def test_unstable_mode_grows_exponentially(basis):
    g = CubeGrid(D, 24)
    eps = 1e-6
    u0 = GridPair.from_jet(g, basis.modes[0] * eps)
    trace = evolution.evolve(u0, THETA0, 0.5, grid=g, basis=basis,
                             record_every=4)
    taus = np.array(trace.taus)
    amps = trace.amplitude_matrix()[:, 0]
    assert np.max(np.abs(amps / (eps * np.exp(taus)) - 1.0)) < 0.02


# ---------------------------------------------------------------------------
# traces, blowup, and reports

def test_trace_requires_increasing_tau():
    tr = EvolutionTrace([], [])
    tr.add(0.0, 1.0, 1.0, [], 1.0)
    with pytest.raises(ValueError):
        tr.add(0.0, 1.0, 1.0, [], 1.0)


def test_blowup_detected():
    g = CubeGrid(D, 16)
    rng = np.random.default_rng(0)
    shp = (g.n,) * D + (D,)
    u0 = GridPair(g, 50.0 * rng.standard_normal(shp),
                  50.0 * rng.standard_normal(shp))
    with np.errstate(all="ignore"):
        with pytest.raises(BlowupDetected) as exc:
            evolution.evolve(u0, THETA0, 2.0, grid=g)
    assert 0.0 < exc.value.tau <= 2.0


def test_decay_report_needs_span():
    tr = EvolutionTrace([], [])
    tr.add(0.0, 1.0, 1.0, [], 1.0)
    tr.add(1.0, 1.0, 1.0, [], 0.5)
    with pytest.raises(ValueError):
        evolution.decay_report(tr)


def test_decay_report_recovers_rate():
    tr = EvolutionTrace([], [])
    for tau in np.linspace(0.0, 4.0, 21):
        tr.add(tau, 1.0, 1.0, [], np.exp(-0.7 * tau))
    rep = evolution.decay_report(tr)
    assert not rep["below_floor"]
    assert abs(rep["eps_fit"] - 0.7) < 1e-8


def test_decay_report_below_floor():
    tr = EvolutionTrace([], [])
    for tau in np.linspace(0.0, 4.0, 9):
        tr.add(tau, 1e-15, 1e-15, [], 1e-15)
    rep = evolution.decay_report(tr)
    assert rep["below_floor"]
    assert rep["eps_fit"] is None


# ---------------------------------------------------------------------------
# the fitter on already-centred data

def test_fit_trivial_perturbation_succeeds():
    g = CubeGrid(D, 20)
    res = evolution.fit_blowup_parameters(None, g, tau_max=4.0, ball=BALL,
                                          max_iter=2)
    assert res.success
    assert abs(res.T - 1.0) < 1e-8
    assert np.max(np.abs(res.X)) < 1e-8
    assert res.theta.norm() < 1e-8
