"""Scale-invariant diagnostics along near-soliton trajectories.

Built around the small parameter mu = lambda sqrt(E[u]): the higher-norm
ladder X2/X3/V72 of eps2, the energy-Morawetz functional

    F = (eps2, Htd_Q eps2)_r / mu^6 - A (i eps2, psi' d_y eps2)_r / mu^5
        + A^2 ||eps2||^2 / mu^4,

nonlinear-coercivity and Hardy-chain ratio records, finite-difference
monitors for the modulation residuals (plain and hat-corrected), blow-up
asymptotics extraction (T, ell, gamma_star), and the near-origin
singular-profile probe.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import gauge as GA
from . import grid as G
from . import linops as L
from . import modulation as MOD
from . import profiles as PR
from .grid import Grid, NormReport, RadialField
from .modulation import DecompResult, ModState
from .profiles import TTable
from .soliton import SymmetryParams, _sample, modulate, q_values, soliton_q

DEFAULT_A = 10.0


class ZeroMu(ValueError):
    pass


class InsufficientSampling(ValueError):
    pass


class NoBlowupDetected(ValueError):
    pass


class AnnulusUnresolved(ValueError):
    pass


# ---------------------------------------------------------------------------
# Per-state frame


@dataclass(frozen=True)
class DiagnosticFrame:
    t: float
    s: float
    mu: float
    beta: float
    eps_norms: tuple  # NormReport triple for (eps, eps1, eps2)
    X2: float
    X3: float
    V72: float
    F_energy: float
    coercivity_ratio: float
    mod_residuals: tuple | None = None


def quadform_htd(f: RadialField, m: int | None = None) -> float:
    """(f, Htd_Q f)_r in the integrated-by-parts (manifestly symmetric)
    form int |d_y f|^2 + Vtd_Q/y^2 |f|^2."""
    mm = f.m - 2 if m is None else m
    y = f.grid.r
    fp = G.d_dr(f.grid, f.values, 1)
    dens = np.abs(fp) ** 2 + L.vtd_q(mm, y) / y**2 * np.abs(f.values) ** 2
    return float(np.real(G.integrate_samples(f.grid, dens)[0]))


def morawetz_pairing(f: RadialField, weight: L.MorawetzWeight) -> float:
    """(i f, psi' d_y f)_r with the module-linops weight."""
    if f.grid != weight.grid:
        raise G.GridError("grid-mismatch between field and weight")
    fp = G.d_dr(f.grid, f.values, 1)
    dens = np.real(np.conj(1j * f.values) * weight.psi_prime * fp)
    return float(np.real(G.integrate_samples(f.grid, dens)[0]))


def frame(d: DecompResult, e_total: float, a_const: float = DEFAULT_A,
          weight: L.MorawetzWeight | None = None,
          t: float = math.nan, s: float = math.nan) -> DiagnosticFrame:
    """All scale-invariant quantities of a single decomposition."""
    mu = d.state.lam * math.sqrt(max(e_total, 0.0))
    if mu <= 0.0:
        raise ZeroMu("zero-mu: the soliton orbit itself carries no scale")
    m = d.eps.m
    eps2 = d.eps2
    x2 = G.l2(eps2) + mu**2
    x3 = G.hdot1(eps2) + mu * x2
    v72 = math.sqrt(G.v32_sq(eps2)) + math.sqrt(mu) * x3
    if weight is None:
        weight = L.morawetz_weight(grid=eps2.grid)
    quad = quadform_htd(eps2, m)
    pair = morawetz_pairing(eps2, weight)
    f_energy = quad / mu**6 - a_const * pair / mu**5 \
        + a_const**2 * G.l2(eps2) ** 2 / mu**4
    return DiagnosticFrame(
        t=t, s=s, mu=mu, beta=d.state.beta,
        eps_norms=(G.norm_report(d.eps), G.norm_report(d.eps1),
                   G.norm_report(eps2)),
        X2=x2, X3=x3, V72=v72, F_energy=f_energy,
        coercivity_ratio=(d.state.beta + G.hdot1(d.eps)) / mu)


def _s_ladder(t: np.ndarray, lam: np.ndarray) -> np.ndarray:
    inv = 1.0 / lam**2
    ds = 0.5 * (inv[1:] + inv[:-1]) * np.diff(t)
    return np.concatenate([[0.0], np.cumsum(ds)])


def frames_along(traj, a_const: float = DEFAULT_A,
                 e_total: float | None = None) -> list[DiagnosticFrame]:
    """DiagnosticFrame per recorded decomposition of a trajectory."""
    decomps = traj.decompositions
    if not decomps:
        raise ValueError("trajectory carries no decompositions")
    if e_total is None:
        e_total = float(np.mean(traj.series["energy"]))
    t = np.array([tt for tt, _ in decomps])
    lam = np.array([d.state.lam for _, d in decomps])
    s = _s_ladder(t, lam)
    weight = L.morawetz_weight(grid=decomps[0][1].eps2.grid)
    return [frame(d, e_total, a_const, weight, t=float(ti), s=float(si))
            for (ti, d), si in zip(decomps, s)]


# ---------------------------------------------------------------------------
# Ratio records


def nonlinear_coercivity_check(decomps, mass: float | None = None) -> dict:
    """Min/max over the series of (beta + ||eps||_{H1dot} + ||eps1||_{L2})/mu
    plus the largest ||eps||_{L2}; states with mu = 0 are excluded."""
    ratios, eps_l2 = [], []
    for item in decomps:
        d = item[1] if isinstance(item, tuple) else item
        eps_l2.append(G.l2(d.eps))
        if d.mu > 0.0:
            ratios.append(
                (d.state.beta + G.hdot1(d.eps) + G.l2(d.eps1)) / d.mu)
    return {"ratio_min": min(ratios) if ratios else math.nan,
            "ratio_max": max(ratios) if ratios else math.nan,
            "eps_l2_max": max(eps_l2), "n_states": len(ratios),
            "mass": mass}


def hardy_ratios(d: DecompResult, mu: float | None = None) -> dict:
    """Recorded constants of the Hardy chain: each eps/eps1 norm against
    its X2/X3/V72 dominator."""
    mu = d.mu if mu is None else mu
    if mu <= 0.0:
        raise ZeroMu("zero-mu")
    x2 = G.l2(d.eps2) + mu**2
    x3 = G.hdot1(d.eps2) + mu * x2
    v72 = math.sqrt(G.v32_sq(d.eps2)) + math.sqrt(mu) * x3
    return {
        "e1_H1": G.hdot1(d.eps1) / x2,
        "e1_H2": G.hdotk_hardy(d.eps1, 2) / x3,
        "e1_V52": math.sqrt(G.v52_sq(d.eps1)) / v72,
        "e_H2": G.calh2(d.eps) / x2,
        "e_H3": G.calh3(d.eps) / x3,
    }


# ---------------------------------------------------------------------------
# Modulation-residual monitor


def _fd_derivative(s: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """Centered 4th-order first derivative on the (nonuniform) s-ladder;
    defined on the interior indices 2 .. n-3."""
    n = s.size
    out = np.empty(n - 4)
    for i in range(2, n - 2):
        w = G._fd_weights(s[i], s[i - 2:i + 3], 1)
        out[i - 2] = float(w @ vals[i - 2:i + 3])
    return out


def _p3_of(m: int, b: float, eta: float) -> tuple[float, float]:
    return PR.p3(m, PR.ProfileParams(b, eta))


def _phase_integral_w(d: DecompResult, table: TTable) -> float:
    """int_0^infty Re(conj(w) w1) dy with w = P + eps, w1 = P1 + eps1."""
    chart = MOD._assemble_chart(table.m, d.state.b, d.state.eta, table)
    w = chart.P.values + d.eps.values
    w1 = chart.P1.values + d.eps1.values
    dens = np.real(np.conj(w) * w1)
    return float(np.real(G.integrate_dy(d.eps.grid, dens)))


def mod_residual_monitor(traj, table: TTable | None = None,
                         max_beta_ds: float = 0.01) -> dict:
    """Finite-difference residuals of the four modulation equations and
    their hat-corrected versions, each with its bound proxy.

    Residuals (at the interior sample points):
        r1 = lambda_s/lambda + b            (proxy X3)
        r2 = gamma_s + (m+1) eta + int Re(conj(w) w1) dy   (proxy X3)
        r3 = b_s + b^2 + eta^2 + p3_b       (proxy V72)
        r4 = eta_s + p3_eta                 (proxy V72)
        r1h = lambda_s/lambda + b_hat       (proxy mu^2)
        r2h = gamma_s - (m+1) eta_hat       (proxy mu^2)
        r3h = b_hat_s + b_hat^2 + eta_hat^2 (proxy beta^3 + beta mu^2 + mu^4)
        r4h = eta_hat_s                     (same proxy)
    """
    decomps = traj.decompositions if hasattr(traj, "decompositions") else traj
    if len(decomps) < 5:
        raise InsufficientSampling(
            "insufficient-sampling: need at least 5 decomposition frames")
    t = np.array([tt for tt, _ in decomps])
    ds_list = [d for _, d in decomps]
    m = ds_list[0].eps.m
    lam = np.array([d.state.lam for d in ds_list])
    gam = np.unwrap(np.array([d.state.gamma for d in ds_list]))
    b = np.array([d.state.b for d in ds_list])
    eta = np.array([d.state.eta for d in ds_list])
    beta = np.hypot(b, eta)
    mu = np.array([d.mu for d in ds_list])
    s = _s_ladder(t, lam)
    worst = float(np.max(0.5 * (beta[1:] + beta[:-1]) * np.diff(s)))
    if worst > max_beta_ds:
        raise InsufficientSampling(
            f"insufficient-sampling: beta*ds = {worst:.3g} exceeds "
            f"{max_beta_ds}; reduce the monitor stride")
    if table is None:
        table = PR.build_t_tables(m, ds_list[0].eps.grid)

    hats = np.array([MOD.corrected_params(d) for d in ds_list])
    b_hat, eta_hat = hats[:, 0], hats[:, 1]
    phase = np.array([_phase_integral_w(d, table) for d in ds_list])
    p3_pairs = np.array([_p3_of(m, bi, ei) for bi, ei in zip(b, eta)])
    x3 = np.array([G.hdot1(d.eps2) + d.mu * (G.l2(d.eps2) + d.mu**2)
                   for d in ds_list])
    v72 = np.array([math.sqrt(G.v32_sq(d.eps2)) for d in ds_list]) \
        + np.sqrt(mu) * x3

    sl = slice(2, -2)
    dlam = _fd_derivative(s, lam)
    dgam = _fd_derivative(s, gam)
    db = _fd_derivative(s, b)
    deta = _fd_derivative(s, eta)
    db_hat = _fd_derivative(s, b_hat)
    deta_hat = _fd_derivative(s, eta_hat)

    r1 = dlam / lam[sl] + b[sl]
    r2 = dgam + (m + 1) * eta[sl] + phase[sl]
    r3 = db + b[sl] ** 2 + eta[sl] ** 2 + p3_pairs[sl, 0]
    r4 = deta + p3_pairs[sl, 1]
    r1h = dlam / lam[sl] + b_hat[sl]
    r2h = dgam - (m + 1) * eta_hat[sl]
    r3h = db_hat + b_hat[sl] ** 2 + eta_hat[sl] ** 2
    r4h = deta_hat
    hat34_bound = beta[sl] ** 3 + beta[sl] * mu[sl] ** 2 + mu[sl] ** 4
    return {"t": t[sl], "s": s[sl],
            "r1": r1, "r2": r2, "r3": r3, "r4": r4,
            "r1_hat": r1h, "r2_hat": r2h, "r3_hat": r3h, "r4_hat": r4h,
            "bound_12": x3[sl], "bound_34": v72[sl],
            "bound_hat_12": mu[sl] ** 2, "bound_hat_34": hat34_bound,
            "b_hat": b_hat[sl], "eta_hat": eta_hat[sl],
            "beta_ds_max": worst}


# ---------------------------------------------------------------------------
# Blow-up asymptotics


def _param_series(traj) -> dict:
    if isinstance(traj, dict):
        return {"t": np.asarray(traj["t"]),
                "lambda": np.asarray(traj["lambda"]),
                "gamma": np.asarray(traj["gamma"]),
                "b": np.asarray(traj["b"]), "eta": np.asarray(traj["eta"])}
    decomps = traj.decompositions
    return {"t": np.array([tt for tt, _ in decomps]),
            "lambda": np.array([d.state.lam for _, d in decomps]),
            "gamma": np.unwrap(np.array([d.state.gamma for _, d in decomps])),
            "b": np.array([d.state.b for _, d in decomps]),
            "eta": np.array([d.state.eta for _, d in decomps])}


def asymptotics(traj, tail_fraction: float = 0.2,
                min_decade: float = 10.0) -> tuple[float, float, dict]:
    """(ell, gamma_star, fits) extracted from the tail of a blow-up run.

    T by linear extrapolation of lambda over the last tail_fraction of the
    samples; ell as the tail average of beta/lambda; gamma_star as the tail
    average of gamma. The fits record mean and relative variation of
    lambda/(T-t), b/(T-t), and eta/(T-t)^2 over the tail."""
    p = _param_series(traj)
    t, lam = p["t"], p["lambda"]
    n_tail = max(int(math.ceil(tail_fraction * t.size)), 5)
    if t.size < n_tail:
        raise NoBlowupDetected("no-blowup-detected: too few samples")
    tt, ll = t[-n_tail:], lam[-n_tail:]
    slope, intercept = np.polyfit(tt, ll, 1)
    if slope >= 0.0:
        raise NoBlowupDetected(
            f"no-blowup-detected: lambda not decreasing (slope {slope:.3g})")
    t_star = -intercept / slope
    if t_star <= t[-1]:
        raise NoBlowupDetected("no-blowup-detected: extrapolated T behind "
                               "the trajectory")
    if (t_star - t[0]) < min_decade * (t_star - t[-1]):
        raise NoBlowupDetected(
            "no-blowup-detected: less than one decade of T - t resolved")
    beta = np.hypot(p["b"], p["eta"])[-n_tail:]
    ell = float(np.mean(beta / ll))
    gamma_star = float(np.mean(p["gamma"][-n_tail:]))

    def fit_record(vals):
        mean = float(np.mean(vals))
        spread = float(np.max(vals) - np.min(vals))
        return {"mean": mean, "relvar": spread / abs(mean)
                if mean != 0.0 else math.inf}

    rem = t_star - tt
    fits = {"T": float(t_star),
            "lambda_over_Tmt": fit_record(ll / rem),
            "b_over_Tmt": fit_record(p["b"][-n_tail:] / rem),
            "eta_over_Tmt2": fit_record(p["eta"][-n_tail:] / rem**2)}
    return ell, gamma_star, fits


# ---------------------------------------------------------------------------
# Singular-profile probe


def singular_target(m: int, ell: float, gamma_star: float) -> complex:
    """Near-origin coefficient of the singular part of the asymptotic
    profile: c r^m on a neighborhood of the origin."""
    if m == 1:
        return -cmath.exp(1j * gamma_star) * ell**2 * math.sqrt(2.0) / 8.0
    if m == 2:
        return cmath.exp(1j * gamma_star) * ell**3 * (math.sqrt(2.0) / 64.0) * 1j
    return 0.0j


def singular_profile_probe(traj, ell: float, gamma_star: float,
                           r_a: float = 0.2, r_b: float = 0.4,
                           min_nodes: int = 16) -> dict:
    """Least-squares fit of u(t_final) - Q^sharp_{lambda, gamma} against
    c r^m on the annulus [r_a, r_b], compared with the singular target."""
    t_fin, u = traj.snapshots[-1]
    t_dec, d = traj.decompositions[-1]
    if t_dec != t_fin:
        raise ValueError("final snapshot carries no decomposition")
    m, grid = u.m, u.grid
    mask = (grid.r >= r_a) & (grid.r <= r_b)
    if int(mask.sum()) < min_nodes or r_a < grid.r_min or r_b > grid.r_max:
        raise AnnulusUnresolved(
            f"annulus-unresolved: {int(mask.sum())} nodes in "
            f"[{r_a}, {r_b}] (need {min_nodes})")
    q_sharp = modulate(soliton_q(m, grid),
                       SymmetryParams(d.state.lam, d.state.gamma))
    res = u.values - q_sharp.values
    rm = grid.r ** m
    num = G.integrate_samples(grid, np.where(mask, res * rm, 0.0))[0]
    den = G.integrate_samples(grid, np.where(mask, rm * rm, 0.0))[0]
    c = complex(num) / float(np.real(den))
    target = singular_target(m, ell, gamma_star)
    rec = {"t": float(t_fin), "m": m, "c": c, "target": target,
           "r_a": r_a, "r_b": r_b, "n_nodes": int(mask.sum())}
    if target != 0.0:
        rec["mag_ratio"] = abs(c) / abs(target)
        dphi = cmath.phase(c / target)
        rec["phase_diff"] = dphi
    return rec


def profile_trajectory(m: int, ode_out: dict, snap_grid: Grid,
                       table: TTable, indices=None):
    """Synthetic trajectory whose snapshots are the pure modified profiles
    [P(b, eta)]_{lambda, gamma} of a modulation-ODE run (eps = 0); used for
    ODE/PDE hybrid probes of the singular profile."""
    from .evolve import Trajectory
    n = len(ode_out["t"])
    if indices is None:
        indices = [n - 1]
    times, snaps, decomps = [], [], []
    for i in indices:
        lam = float(ode_out["lambda"][i])
        gam = float(ode_out["gamma"][i])
        b = float(ode_out["b"][i])
        eta = float(ode_out["eta"][i])
        pset = PR.assemble(m, PR.ProfileParams(b, eta), table)
        vals = cmath.exp(1j * gam) / lam * _sample(pset.P, snap_grid.r / lam)
        u = RadialField(m, vals, snap_grid, decay=None)
        state = ModState(lam, gam, b, eta)
        zero = G.zero_field(m, snap_grid)
        zero1 = G.zero_field(m + 1, snap_grid)
        zero2 = G.zero_field(m + 2, snap_grid)
        energy, _, _ = GA.energy_mass(u)
        d = DecompResult(state=state, eps=zero, eps1=zero1, eps2=zero2,
                         ortho_residuals=(0.0, 0.0, 0.0, 0.0),
                         mu=lam * math.sqrt(max(energy, 0.0)),
                         tube_distance=0.0, converged=True, iterations=0)
        tt = float(ode_out["t"][i])
        times.append(tt)
        snaps.append((tt, u))
        decomps.append((tt, d))
    return Trajectory(times=np.array(times), series={}, snapshots=snaps,
                      decompositions=decomps, stop_reason="synthetic",
                      config=None)
