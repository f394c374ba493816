"""Orthogonality profiles, tube decomposition, corrected parameters,
and the formal modulation ODE.

Frozen oracles: the closed-form trajectory (lambda, b, eta) =
(sqrt(t^2 + eta0^2), -t, eta0) of the leading cubic-free system, the
conserved ratio beta^2/lambda^2, and the pseudoconformal law
lambda(t) = T - t.
"""

import math

import numpy as np
import pytest

from csslab import grid as G
from csslab import modulation as MOD
from csslab import profiles as PR
from csslab.grid import RadialField
from csslab.modulation import (DecompResult, ModState, NotInTube,
                               build_ortho_profiles, corrected_params,
                               decompose, ode_integrate, ode_rhs)
from csslab.profiles import GridTooSmall, ProfileParams
from csslab.soliton import SymmetryParams, modulate, q_values, soliton_q


@pytest.fixture(scope="module")
def table1(grid):
    return PR.build_t_tables(1, grid)


@pytest.fixture(scope="module")
def ortho1(grid):
    return build_ortho_profiles(1, grid)


@pytest.fixture(scope="module")
def ortho2(grid):
    return build_ortho_profiles(2, grid)


# ---------------------------------------------------------------------------
# Orthogonality profiles


@pytest.mark.parametrize("m", [1, 2])
def test_gauge_residuals(grid, m, ortho1, ortho2):
    pr = {1: ortho1, 2: ortho2}[m]
    import csslab.linops as L
    rho = L.rho(m, grid)
    scale = G.l2(rho) * G.l2(pr.Z1)
    assert abs(G.inner(rho, pr.Z1)) < 1e-8 * scale
    y = grid.r
    w = RadialField(m, (y**2 / 4.0) * q_values(m, y), grid)
    miz2 = pr.Z2.with_values(-1j * pr.Z2.values)
    assert abs(G.inner(w, miz2)) < 1e-8 * G.l2(w.with_values(
        w.values * G.smooth_bump(y / pr.R_circ))) * G.l2(miz2)


def test_halving_condition(grid, ortho1):
    # m = 1 closed form: with T = R^2,
    # int_0^R (yQ)^2 y dy proportional to atan(T) - T/(1+T^2), total pi/2;
    # the outer mass is at most a quarter of the total when the inner
    # integral reaches 3 pi / 8
    def inner_mass(r):
        t = r**2
        return math.atan(t) - t / (1.0 + t**2)

    assert inner_mass(ortho1.R_circ) >= 3.0 * math.pi / 8.0
    # and R_circ is minimal: one node earlier the tail is still too heavy
    y = grid.r
    idx = int(np.searchsorted(y, ortho1.R_circ))
    assert inner_mass(y[idx - 1]) < 3.0 * math.pi / 8.0


def test_supports_and_transversality(grid, ortho1):
    y = grid.r
    far = y > 2.0 * ortho1.R_circ
    for z in (ortho1.Z1, ortho1.Z2, ortho1.Z3t, ortho1.Z4t):
        assert np.all(z.values[far] == 0.0)
    assert np.real(ortho1.Z1.values).any() and not np.imag(ortho1.Z1.values).any()
    assert np.imag(ortho1.Z2.values).any() and not np.real(ortho1.Z2.values).any()
    t1, t2 = ortho1.transversality
    assert abs(t1) > 1.0 and abs(t2) > 1.0


# ---------------------------------------------------------------------------
# Decomposition


def _wrap(x):
    return (x + math.pi) % (2.0 * math.pi) - math.pi


def test_decompose_exact_orbit(grid, ortho1, table1):
    q = soliton_q(1, grid)
    u = modulate(q, SymmetryParams(1.3, 0.7))
    d = decompose(u, ortho1, table=table1)
    assert d.converged
    assert d.state.lam == pytest.approx(1.3, rel=1e-7)
    assert _wrap(d.state.gamma - 0.7) == pytest.approx(0.0, abs=1e-7)
    assert abs(d.state.b) < 1e-7 and abs(d.state.eta) < 1e-7
    assert G.l2(d.eps) < 1e-6 * G.l2(q)
    assert max(abs(r) for r in d.ortho_residuals) < 1e-10 * G.l2(q)


def _synthetic_datum(grid, table, b, eta, lam, gamma, amp=1e-3):
    pset = PR.assemble(1, ProfileParams(b, eta), table)
    y = grid.r
    bump = amp * y * np.exp(-((y - 1.5) ** 2)) * (1.0 + 0.5j)
    v = RadialField(1, pset.P.values + bump, grid, decay=3.0)
    return modulate(v, SymmetryParams(lam, gamma))


def test_decompose_round_trip(grid, ortho1, table1):
    u = _synthetic_datum(grid, table1, 0.03, 0.02, 0.9, 0.4)
    d1 = decompose(u, ortho1, table=table1)
    assert d1.converged
    # re-modulate the decomposed flat-frame data with fresh parameters:
    # the orthogonality conditions already hold, so the decomposition
    # must return exactly the new symmetry parameters and the same (b, eta)
    s1 = d1.state
    pset = PR.assemble(1, ProfileParams(s1.b, s1.eta), table1)
    w = RadialField(1, pset.P.values + d1.eps.values, grid, decay=3.0)
    u2 = modulate(w, SymmetryParams(1.1, -0.3))
    d2 = decompose(u2, ortho1, table=table1)
    assert d2.state.lam == pytest.approx(1.1, rel=1e-8)
    assert _wrap(d2.state.gamma + 0.3) == pytest.approx(0.0, abs=1e-8)
    assert d2.state.b == pytest.approx(s1.b, abs=1e-8)
    assert d2.state.eta == pytest.approx(s1.eta, abs=1e-8)
    assert G.l2(d2.eps.with_values(d2.eps.values - d1.eps.values)) < 1e-7


def test_decompose_equivariance(grid, ortho1, table1):
    u = _synthetic_datum(grid, table1, 0.02, -0.01, 1.0, 0.2)
    d1 = decompose(u, ortho1, table=table1)
    u2 = modulate(u, SymmetryParams(1.2, 0.5))
    d2 = decompose(u2, ortho1, table=table1)
    assert d2.state.lam == pytest.approx(1.2 * d1.state.lam, rel=1e-6)
    assert _wrap(d2.state.gamma - d1.state.gamma - 0.5) == pytest.approx(0.0, abs=1e-6)
    assert d2.state.b == pytest.approx(d1.state.b, abs=1e-6)
    assert d2.state.eta == pytest.approx(d1.state.eta, abs=1e-6)


def test_decompose_not_in_tube(grid, ortho1, table1):
    y = grid.r
    vals = 5.0 * y * np.exp(-(y**2) / 4.0)
    u = RadialField(1, vals, grid)
    with pytest.raises(NotInTube):
        decompose(u, ortho1, table=table1)


def test_jacobian_structure(grid, ortho1, table1):
    # finite-difference Jacobian at a converged beta = 0.02 state
    u = _synthetic_datum(grid, table1, 0.02, 0.0, 1.0, 0.0, amp=2e-4)
    d = decompose(u, ortho1, table=table1)
    s = d.state
    x0 = np.array([math.log(s.lam), s.gamma, s.b, s.eta])
    h = 1e-6
    base, _ = MOD._pairings(u, s, table1, ortho1)
    jac = np.empty((4, 4))
    for j in range(4):
        xp = x0.copy()
        xp[j] += h
        vp, _ = MOD._pairings(
            u, ModState(math.exp(xp[0]), xp[1], xp[2], xp[3]), table1, ortho1)
        jac[:, j] = (vp - base) / h
    q = soliton_q(1, grid)
    lam_q = G.scale_gen(q)
    y = grid.r
    expected = np.array([
        G.inner(lam_q, ortho1.Z1),
        G.inner(q.with_values(-1j * q.values), ortho1.Z2),
        G.inner(RadialField(2, 1j * (y / 2.0) * q_values(1, y), grid),
                ortho1.Z3t),
        G.inner(RadialField(2, (y / 2.0) * q_values(1, y), grid),
                ortho1.Z4t)])
    diag = np.diag(jac)
    assert np.all(np.abs(diag - expected) < 0.15 * np.abs(expected))
    # row diagonal dominance, off-diagonal O(beta)
    for i in range(4):
        off = np.sum(np.abs(jac[i])) - abs(jac[i, i])
        assert off < abs(jac[i, i])
        assert off < 30.0 * 0.02 * abs(jac[i, i])


# ---------------------------------------------------------------------------
# Corrected parameters


def _result_with_eps1(grid, eps1_vals, mu):
    z1 = G.zero_field(1, grid)
    state = ModState(1.0, 0.0, 0.01, 0.005)
    return DecompResult(state=state, eps=z1,
                        eps1=RadialField(2, eps1_vals, grid),
                        eps2=G.zero_field(3, grid), ortho_residuals=(0,) * 4,
                        mu=mu, tube_distance=0.0, converged=True, iterations=1)


def test_corrected_params_zero_eps1(grid):
    d = _result_with_eps1(grid, np.zeros(grid.n, dtype=complex), 0.5)
    bh, eh = corrected_params(d)
    assert bh == d.state.b and eh == d.state.eta


def test_corrected_params_linear(grid):
    y = grid.r
    vals = (0.3 + 0.2j) * y**2 * np.exp(-(y**2))
    d1 = _result_with_eps1(grid, vals, 0.5)
    d2 = _result_with_eps1(grid, 2.0 * vals, 0.5)
    b1, e1 = corrected_params(d1)
    b2, e2 = corrected_params(d2)
    assert b2 - d2.state.b == pytest.approx(2.0 * (b1 - d1.state.b), rel=1e-12)
    assert e2 - d2.state.eta == pytest.approx(2.0 * (e1 - d1.state.eta), rel=1e-12)


def test_corrected_params_grid_too_small(grid):
    d = _result_with_eps1(grid, np.zeros(grid.n, dtype=complex), 1e-4)
    with pytest.raises(GridTooSmall):
        corrected_params(d)


# ---------------------------------------------------------------------------
# Modulation ODE


@pytest.mark.parametrize("m", [1, 2, 3])
def test_ode_rhs_leading_phase(m):
    st = ModState(1.0, 0.0, 0.0, 0.04)
    _, gam_s, _, _ = ode_rhs(m, st, use_p3=False, leading_order=True)
    assert gam_s == pytest.approx((m + 1) * 0.04, rel=1e-14)


@pytest.mark.parametrize("t", [-3.0, -0.5, 0.0, 0.7, 5.0])
def test_ode_rhs_formal_solution(t):
    eta0 = 0.05
    lam = math.hypot(t, eta0)
    st = ModState(lam, 0.0, -t, eta0)
    lam_s, gam_s, b_s, eta_s = ode_rhs(1, st, use_p3=False, leading_order=True)
    # s-derivatives of the closed form lambda = sqrt(t^2 + eta0^2), b = -t
    assert lam_s == pytest.approx(t * lam, abs=1e-12)
    assert b_s == pytest.approx(-(t**2 + eta0**2), rel=1e-12)
    assert eta_s == 0.0
    assert gam_s == pytest.approx(2.0 * eta0, rel=1e-12)


def test_ode_rhs_conserves_beta_over_lambda():
    for (b, eta) in [(0.04, 0.0), (0.02, 0.03), (-0.05, 0.01)]:
        st = ModState(0.8, 0.3, b, eta)
        lam_s, _, b_s, eta_s = ode_rhs(1, st, use_p3=False, leading_order=True)
        beta2 = b**2 + eta**2
        deriv = (2 * b * b_s + 2 * eta * eta_s) / st.lam**2 \
            - 2.0 * beta2 * lam_s / st.lam**3
        assert abs(deriv) < 1e-12


def test_ode_rhs_profile_phase_near_leading(table1):
    st = ModState(1.0, 0.0, 0.0, 0.03)
    _, gs_full, _, _ = ode_rhs(1, st, table=table1, use_p3=False)
    _, gs_lead, _, _ = ode_rhs(1, st, use_p3=False, leading_order=True)
    assert abs(gs_full - gs_lead) < 3.0 * st.beta**2


def test_ode_integrate_pseudoconformal_law():
    lam0 = 0.08
    st = ModState(lam0, 0.0, lam0, 0.0)
    out = ode_integrate(1, st, (0.0, lam0 - 1e-4), use_p3=False,
                        leading_order=True, lam_min=1e-5)
    T = lam0
    err = np.max(np.abs(out["lambda"] - (T - out["t"])))
    assert err < 1e-9


def test_ode_integrate_conserved_ratio():
    st = ModState(0.9, 0.0, 0.05, 0.03)
    out = ode_integrate(1, st, (0.0, 5.0), use_p3=False, leading_order=True,
                        lam_min=1e-4)
    ratio = (out["b"] ** 2 + out["eta"] ** 2) / out["lambda"] ** 2
    assert np.max(np.abs(ratio - ratio[0])) < 1e-9


def test_ode_integrate_rotational_phase():
    # closed form: gamma(t) = (m+1) atan(t/eta0), so the total phase change
    # approaches (m+1) pi as the window grows; [-100, 100] puts the
    # kinematic truncation below the 0.1% target
    eta0 = 0.05
    t0 = -100.0
    st = ModState(math.hypot(t0, eta0), 2.0 * math.atan(t0 / eta0), -t0, eta0)
    out = ode_integrate(1, st, (t0, 100.0), use_p3=False, leading_order=True,
                        lam_min=1e-6, n_eval=2001)
    dgamma = out["gamma"][-1] - out["gamma"][0]
    assert abs(dgamma - 2.0 * math.pi) < 1e-3 * 2.0 * math.pi
    closed = 2.0 * (math.atan(100.0 / eta0) - math.atan(t0 / eta0))
    assert dgamma == pytest.approx(closed, rel=1e-8)
    # lambda follows the closed form too
    lam_exact = np.hypot(out["t"], eta0)
    assert np.max(np.abs(out["lambda"] / lam_exact - 1.0)) < 1e-8


def test_ode_integrate_blowup_event():
    lam0 = 0.08
    st = ModState(lam0, 0.0, lam0, 0.0)
    out = ode_integrate(1, st, (0.0, 1.0), use_p3=False, leading_order=True,
                        lam_min=1e-3)
    assert out["stop"] == "blowup-reached"
    assert out["lambda"][-1] <= 2e-3


def test_cubic_rigidity_m1():
    # cubic corrections on, eta0 = 0: lambda/(T - t) settles, eta/(T-t)^2 bounded.
    # The cubic term slowly rotates (b, eta), so an exact-eta0=0 trajectory
    # eventually bounces instead of blowing up; the rigidity window is the
    # pseudoconformal regime before the bounce, hence lam_min = 0.05.
    st = ModState(1.0, 0.0, 0.05, 0.0)
    out = ode_integrate(1, st, (0.0, 50.0), use_p3=True, leading_order=True,
                        lam_min=0.05, n_eval=20001)
    t, lam, eta = out["t"], out["lambda"], out["eta"]
    assert out["stop"] == "blowup-reached"
    # extrapolate T from the last stretch
    tail = lam < 10.0 * lam[-1]
    c = np.polyfit(t[tail], lam[tail], 1)
    T = -c[1] / c[0]
    delta = T - t
    last_decade = (delta > 0) & (delta < 10.0 * delta[-1]) & (delta > delta[-1])
    ratio = lam[last_decade] / delta[last_decade]
    rel_var = (ratio.max() - ratio.min()) / ratio.mean()
    assert rel_var < 0.01
    eta_ratio = np.abs(eta[last_decade]) / delta[last_decade] ** 2
    assert np.max(eta_ratio) < 10.0


def test_modstate_validation():
    with pytest.raises(ValueError):
        ModState(-1.0, 0.0, 0.0, 0.0)
    st = ModState(2.0, 0.1, 0.03, 0.04)
    assert st.beta == pytest.approx(0.05)
