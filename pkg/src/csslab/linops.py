"""Linearized operators around Q, their formal right inverses, the Morawetz
weight, and empirical coercivity probes.

All operators use the closed-form potential A_theta[Q] = -2(m+1)t/(1+t)
with t = y^{2m+2}. Index bookkeeping (base index m):

    L_Q, L_Q*   : m <-> m+1   (real-linear: they see Re and Im differently)
    A_Q, A_Q*   : m+1 <-> m+2
    H_Q = A_Q* A_Q   on index m+1, potential V_Q = (m+1+A)^2 - y^2 Q^2 / 2
    Htd_Q = A_Q A_Q* on index m+2, potential Vtd_Q = (m+2+A)^2 + y^2 Q^2 / 2
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import grid as G
from .grid import Grid, IndexMismatch, RadialField
from .soliton import q_values

TAGS = ("LQ", "LQ_star", "AQ", "AQ_star", "HQ", "HtdQ")


class OrthogonalityViolated(ValueError):
    pass


class TailDivergent(ValueError):
    pass


class DegenerateOrtho(ValueError):
    pass


class RepulsivityViolated(ValueError):
    pass


@dataclass(frozen=True)
class OperatorKind:
    """Operator tag together with the base equivariance index m."""

    tag: str
    m: int = 1

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown operator tag {self.tag!r}")

    @property
    def domain_index(self) -> int:
        return {"LQ": self.m, "LQ_star": self.m + 1, "AQ": self.m + 1,
                "AQ_star": self.m + 2, "HQ": self.m + 1,
                "HtdQ": self.m + 2}[self.tag]

    @property
    def range_index(self) -> int:
        return {"LQ": self.m + 1, "LQ_star": self.m, "AQ": self.m + 2,
                "AQ_star": self.m + 1, "HQ": self.m + 1,
                "HtdQ": self.m + 2}[self.tag]

    @property
    def complex_linear(self) -> bool:
        return self.tag not in ("LQ", "LQ_star")


# ---------------------------------------------------------------------------
# Closed forms around Q


def a_theta_q(m: int, r: np.ndarray) -> np.ndarray:
    t = r ** (2 * m + 2)
    return -2.0 * (m + 1) * t / (1.0 + t)


def v_q(m: int, r: np.ndarray) -> np.ndarray:
    """Potential of H_Q (times y^2): (m+1+A)^2 - y^2 Q^2 / 2."""
    q = q_values(m, r)
    return (m + 1 + a_theta_q(m, r)) ** 2 - 0.5 * r**2 * q**2


def vtd_q(m: int, r: np.ndarray) -> np.ndarray:
    """Potential of Htd_Q (times y^2): (m+2+A)^2 + y^2 Q^2 / 2 >= m^2."""
    q = q_values(m, r)
    return (m + 2 + a_theta_q(m, r)) ** 2 + 0.5 * r**2 * q**2


def p_const(m: int) -> float:
    """The mass-type constant int_0^inf (yQ)^2 y dy = 4 pi / sin(pi/(m+1))."""
    return 4.0 * math.pi / math.sin(math.pi / (m + 1))


# ---------------------------------------------------------------------------
# Forward application


def _check_domain(kind: OperatorKind, f: RadialField):
    if f.m != kind.domain_index:
        raise IndexMismatch(
            f"{kind.tag} expects index {kind.domain_index}, got {f.m}")


def apply(kind: OperatorKind, f: RadialField) -> RadialField:
    _check_domain(kind, f)
    g, r, m = f.grid, f.grid.r, kind.m
    a = a_theta_q(m, r)
    q = q_values(m, r)
    tag = kind.tag
    if tag == "LQ":
        # D_Q f - (2/y) A_theta[Q, f] Q with A_theta[Q, f] = -1/2 C, so + C Q / y
        d = G.d_dr(g, f.values, 1) - ((m + a) / r) * f.values
        c = G.cumulative_rdr(g, np.real(q * f.values))
        vals = d + np.real(c) * q / r
    elif tag == "LQ_star":
        d = -G.d_dr(g, f.values, 1) - ((m + 1 + a) / r) * f.values
        tail_p = None if f.decay is None else f.decay + m + 2
        back = G.backward_dy(g, np.real(q * f.values), tail_power=tail_p)
        vals = d + np.real(back) * q
    elif tag == "AQ":
        vals = G.d_dr(g, f.values, 1) - ((m + 1 + a) / r) * f.values
    elif tag == "AQ_star":
        vals = -G.d_dr(g, f.values, 1) - ((m + 2 + a) / r) * f.values
    elif tag == "HQ":
        vals = (-G.d_dr(g, f.values, 2) - G.d_dr(g, f.values, 1) / r
                + v_q(m, r) / r**2 * f.values)
    else:  # HtdQ
        vals = (-G.d_dr(g, f.values, 2) - G.d_dr(g, f.values, 1) / r
                + vtd_q(m, r) / r**2 * f.values)
    return RadialField(kind.range_index, vals, g)


# ---------------------------------------------------------------------------
# Explicit solutions J1, J2 and the kernel pairs


def j_pair(grid: Grid, m: int):
    """Closed-form solutions of J'' + J'/y + Q^2 J = 0 with Wronskian
    J1 J2' - J1' J2 = 1/y. Returns (J1, J1', J2, J2')."""
    y = grid.r
    t = y ** (2 * m + 2)
    j1 = (1.0 - t) / (1.0 + t)
    dt = (2 * m + 2) * t / y
    j1p = -2.0 * dt / (1.0 + t) ** 2
    gpart = (2.0 / (m + 1)) / (1.0 + t)
    gp = -(2.0 / (m + 1)) * dt / (1.0 + t) ** 2
    logy = np.log(y)
    j2 = j1 * logy + gpart
    j2p = j1p * logy + j1 / y + gp
    return j1, j1p, j2, j2p


def _kernel_pair_hq(grid: Grid, m: int):
    """(h1, h2) spanning the kernel of H_Q with y (h1 h2' - h1' h2) = 1."""
    y = grid.r
    q = q_values(m, y)
    h1 = y * q
    # c(y) = int_1^y dy'/(y'^3 Q^2) in closed form: the integrand expands to
    # (y^{-2m-3} + 2/y + y^{2m+1}) / (8(m+1)^2)
    t = y ** (2 * m + 2)
    c = ((t - 1.0 / t) / (2 * m + 2) + 2.0 * np.log(y)) / (8.0 * (m + 1) ** 2)
    h2 = h1 * c
    return h1, h2


def _kernel_pair_htd(grid: Grid, m: int):
    """(h1td, h2td) for Htd_Q: h1td regular at 0, h2td decaying at infinity."""
    y = grid.r
    q = q_values(m, y)
    yq2 = (y * q) ** 2
    fwd = np.real(G.cumulative_rdr(grid, yq2))
    back = np.real(G.backward_cumulative_dx(grid, yq2 * y**2))
    back = back + yq2[-1] * grid.r_max**2 / (2 * m + 2 - 2.0)
    p = p_const(m)
    h1 = fwd / (y**2 * q)
    h2 = back / (y**2 * q * p)
    return h1, h2


def _backward_rdr(grid: Grid, vals: np.ndarray, tail_power: float | None = None):
    """int_y^{inf} vals y' dy' with optional algebraic tail vals ~ c r^{-p}."""
    out = G.backward_cumulative_dx(grid, np.asarray(vals, dtype=np.complex128)
                                   * grid.r**2)
    if tail_power is not None and tail_power > 2.0:
        out = out + complex(vals[-1]) * grid.r_max**2 / (tail_power - 2.0)
    return out


# ---------------------------------------------------------------------------
# Right inverses


def rho(m: int, grid: Grid) -> RadialField:
    """The generalized kernel element: rho = out L_Q^{-1}(yQ / (2(m+1))),
    a real field of index m with rho <~ y^2 Q."""
    q1 = q_values(m, grid.r)
    f = RadialField(m + 1, grid.r * q1 / (2.0 * (m + 1)), grid, decay=m + 1)
    out = right_inverse(OperatorKind("LQ", m), f, "outgoing")
    return RadialField(m, np.real(out.values).astype(complex), grid, decay=float(m))


def right_inverse(kind: OperatorKind, f: RadialField,
                  branch: str = "outgoing",
                  ortho_tol: float = 1e-6) -> RadialField:
    _check_range(kind, f)
    if branch not in ("outgoing", "inner", "orthogonal"):
        raise ValueError(f"unknown branch {branch!r}")
    if branch == "inner" and kind.tag != "HtdQ":
        raise ValueError("inner branch is defined for HtdQ only")
    if branch == "orthogonal" and kind.tag not in ("AQ_star", "HQ"):
        raise ValueError("orthogonal branch is defined for AQ_star and HQ only")
    g, y, m = f.grid, f.grid.r, kind.m
    q = q_values(m, y)
    tag = kind.tag

    if tag == "LQ":
        j1, j1p, j2, j2p = j_pair(g, m)
        u = np.real(f.values) / q
        i2 = np.real(G.cumulative_rdr(g, j2p * u, include_origin=False))
        i1 = np.real(G.cumulative_rdr(g, j1p * u, include_origin=False))
        re = q * (j1 * i2 - j2 * i1)
        im = q * np.real(G.cumulative_dy(g, np.imag(f.values) / q,
                                         include_origin=False))
        vals = re + 1j * im
    elif tag == "AQ":
        vals = y * q * G.cumulative_dy(g, f.values / (y * q),
                                       include_origin=False)
    elif tag == "AQ_star":
        if branch == "orthogonal":
            _require_yq_orthogonal(kind, f, ortho_tol)
            tail_p = None if f.decay is None else f.decay + m + 1
            vals = _backward_rdr(g, y * q * f.values, tail_p) / (y**2 * q)
        else:
            vals = -G.cumulative_rdr(g, y * q * f.values) / (y**2 * q)
    elif tag == "HQ":
        h1, h2 = _kernel_pair_hq(g, m)
        i1 = G.cumulative_rdr(g, h1 * f.values, include_origin=False)
        i2 = G.cumulative_rdr(g, h2 * f.values, include_origin=False)
        if branch == "orthogonal":
            _require_yq_orthogonal(kind, f, ortho_tol)
            j2 = _backward_rdr(g, h2 * f.values)
            vals = -h2 * i1 - h1 * j2
        else:
            vals = h1 * i2 - h2 * i1
    elif tag == "HtdQ":
        h1, h2 = _kernel_pair_htd(g, m)
        i1 = G.cumulative_rdr(g, h1 * f.values, include_origin=False)
        if branch == "inner":
            integ = np.abs(h2 * f.values) * y**2
            if integ[-1] > 4.0 * integ[-8]:
                raise TailDivergent(
                    "inner HtdQ inverse: h2~*f not integrable at infinity")
            j2 = _backward_rdr(g, h2 * f.values)
            vals = h2 * i1 + h1 * j2
        else:
            i2 = G.cumulative_rdr(g, h2 * f.values, include_origin=False)
            vals = h2 * i1 - h1 * i2
    else:
        raise ValueError("L_Q* has no implemented right inverse")
    out = RadialField(kind.domain_index, vals, g)
    if not kind.complex_linear:
        return out
    return out


def _check_range(kind: OperatorKind, f: RadialField):
    if f.m != kind.range_index:
        raise IndexMismatch(
            f"right_inverse({kind.tag}) expects index {kind.range_index}, got {f.m}")


def _require_yq_orthogonal(kind: OperatorKind, f: RadialField, tol: float):
    g, y = f.grid, f.grid.r
    q = q_values(kind.m, y)
    yq = y * q
    pair = complex(G.integrate_samples(g, yq * f.values)[0])
    scale = G.l2_samples(g, yq) * max(G.l2_samples(g, f.values), 1e-300)
    if abs(pair) > tol * scale:
        raise OrthogonalityViolated(
            f"orthogonal branch needs (f, yQ) = 0; got {pair:.3e}")


# ---------------------------------------------------------------------------
# Morawetz weight


@dataclass(frozen=True)
class MorawetzWeight:
    delta: float
    psi: np.ndarray
    psi_prime: np.ndarray
    psi_dprime: np.ndarray
    laplacian_psi: np.ndarray
    bilaplacian_psi: np.ndarray
    c1: float
    c2: float
    c_rpsi: float
    grid: Grid


def _weight_arrays(delta: float, y: np.ndarray):
    ang = np.sqrt(1.0 + y**2)
    psi = ang - 0.5 * delta * np.log(1.0 + y**2)
    psi_p = y / ang - delta * y / ang**2
    psi_pp = 1.0 / ang**3 - delta * (1.0 - y**2) / ang**4
    lap = (2.0 + y**2) / ang**3 - 2.0 * delta / ang**4
    bilap = (y**4 + 8.0 * y**2 - 8.0) / ang**7 \
        + 16.0 * delta * (1.0 - 2.0 * y**2) / ang**8
    return psi, psi_p, psi_pp, lap, bilap


def morawetz_weight(delta: float = 0.3, grid: Grid | None = None,
                    auto_halve: bool = True) -> MorawetzWeight:
    """Repulsive weight psi' = y/<y> - delta y/<y>^2. The returned record
    witnesses c1, c2 > 0 in psi'' >= c1/<y>^2 and
    psi'/y - y^2 (Delta^2 psi)/4 >= c2/<y>; delta is halved automatically
    until both hold (disable with auto_halve=False to get the error)."""
    if not (0.0 < delta < 1.0) and delta != 0.0:
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    if grid is None:
        grid = G.default_grid()
    y = grid.r
    ang = np.sqrt(1.0 + y**2)
    while True:
        psi, psi_p, psi_pp, lap, bilap = _weight_arrays(delta, y)
        c1 = float(np.min(psi_pp * ang**2))
        c2 = float(np.min((psi_p / y - 0.25 * y**2 * bilap) * ang))
        if c1 > 0.0 and c2 > 0.0:
            break
        if not auto_halve or delta < 1e-6:
            node = y[int(np.argmin(psi_pp * ang**2))] if c1 <= 0.0 else \
                y[int(np.argmin((psi_p / y - 0.25 * y**2 * bilap) * ang))]
            raise RepulsivityViolated(
                f"repulsivity-violated at delta={delta}: c1={c1:.3e}, "
                f"c2={c2:.3e}, node y={node:.8g}")
        delta *= 0.5
    # r d_r psi' <= C / <r>
    c_rpsi = float(np.max(y * psi_pp * ang))
    if np.any(psi_p < -1e-14) or np.any(psi_p > 1.0 + 1e-14):
        raise RepulsivityViolated("psi' leaves [0, 1]")
    return MorawetzWeight(delta=delta, psi=psi, psi_prime=psi_p,
                          psi_dprime=psi_pp, laplacian_psi=lap,
                          bilaplacian_psi=bilap, c1=c1, c2=c2,
                          c_rpsi=c_rpsi, grid=grid)


def lambda_psi(w: MorawetzWeight, f: RadialField) -> RadialField:
    """The antisymmetric generator Lambda_psi f = psi' d_y f + (Delta psi / 2) f."""
    vals = w.psi_prime * G.d_dr(f.grid, f.values, 1) \
        + 0.5 * w.laplacian_psi * f.values
    return RadialField(f.m, vals, f.grid)


def morawetz_quadform(f: RadialField, w: MorawetzWeight, m: int | None = None):
    """Q_form = (Htd_Q f, Lambda_psi f)_r via the integrated-by-parts identity

        int psi'' |d_y f|^2
        + int [ (psi'/y)(Vtd_Q + y^2 Q^2 / 2) - y^2 (Delta^2 psi)/4 ] |f|^2/y^2

    together with the squared V^{3/2}-norm of f. The base index is inferred
    from f (index m+2) unless given."""
    if f.grid != w.grid:
        raise G.GridError("grid-mismatch between field and weight")
    mm = f.m - 2 if m is None else m
    if f.m != mm + 2:
        raise IndexMismatch(f"morawetz_quadform expects index {mm + 2}, got {f.m}")
    y = f.grid.r
    q = q_values(mm, y)
    fp = G.d_dr(f.grid, f.values, 1)
    dens = w.psi_dprime * np.abs(fp) ** 2 + (
        (w.psi_prime / y) * (vtd_q(mm, y) + 0.5 * y**2 * q**2)
        - 0.25 * y**2 * w.bilaplacian_psi) * np.abs(f.values / y) ** 2
    q_form = float(np.real(G.integrate_samples(f.grid, dens)[0]))
    return q_form, G.v32_sq(f)


# ---------------------------------------------------------------------------
# Coercivity probes


def random_smooth_field(m: int, k: int, grid: Grid, rng) -> RadialField:
    """Envelope r^{m+k} e^{-r^2/2} times a low-order complex polynomial with
    unit-normal coefficients, truncated by a smooth cutoff at r = 10."""
    r = grid.r
    coeffs = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    poly = sum(c * r**j for j, c in enumerate(coeffs))
    env = r ** (m + k) * np.exp(-(r**2) / 2.0) * G.smooth_bump(r / 10.0)
    return RadialField(m, env * poly, grid)


def project_orthogonal(f: RadialField, ortho: list[RadialField]) -> RadialField:
    """Gram-Schmidt projection of f onto the (.,.)_r-orthocomplement of ortho."""
    if not ortho:
        return f
    gram = np.array([[G.inner(a, b) for b in ortho] for a in ortho])
    scale = max(abs(gram).max(), 1e-300)
    if abs(np.linalg.det(gram)) < 1e-12 * scale ** len(ortho):
        raise DegenerateOrtho("pairing matrix of the ortho set is singular")
    rhs = np.array([G.inner(z, f) for z in ortho])
    coef = np.linalg.solve(gram, rhs)
    vals = f.values - sum(c * z.values for c, z in zip(coef, ortho))
    return f.with_values(vals, decay=None)


def coercivity_probe(kind: OperatorKind, ortho: list[RadialField],
                     samples: int = 50, seed: int = 7,
                     grid: Grid | None = None) -> dict:
    """Empirical min/max of coercivity ratios over random smooth fields
    projected orthogonal to `ortho`. Ratio ladder:

        r1 = ||T eps||_{L2}   / ||eps||_{Hdot1}
        r2 = ||T eps||_{Hdot1} / ||eps||_{calH2}
        r3 = ||T eps||_{calH2} / ||eps||_{calH3}

    plus, for A_Q, rV = ||A_Q eps||_{L2} / ||eps||_{V3/2}."""
    if grid is None:
        grid = ortho[0].grid if ortho else G.default_grid()
    rng = np.random.default_rng(seed)
    dom = kind.domain_index
    ratios: dict[str, list[float]] = {"L2_over_H1": [], "H1_over_calH2": [],
                                      "calH2_over_calH3": []}
    if kind.tag == "AQ":
        ratios["L2_over_V32"] = []
    for _ in range(samples):
        eps = random_smooth_field(dom, 1 + rng.integers(0, 2), grid, rng)
        eps = project_orthogonal(eps, ortho)
        out = apply(kind, eps)
        h1 = G.hdot1(eps)
        if h1 < 1e-12:
            continue
        ratios["L2_over_H1"].append(G.l2(out) / h1)
        ratios["H1_over_calH2"].append(G.hdot1(out) / G.calh2(eps))
        ratios["calH2_over_calH3"].append(G.calh2(out) / G.calh3(eps))
        if kind.tag == "AQ":
            ratios["L2_over_V32"].append(G.l2(out) / math.sqrt(G.v32_sq(eps)))
    record = {"kind": kind.tag, "m": kind.m, "samples": samples,
              "grid_id": grid.key, "ratios": {}}
    for name, vals in ratios.items():
        record["ratios"][name] = {"min": float(min(vals)), "max": float(max(vals))}
    record["min_ratio"] = record["ratios"]["L2_over_H1"]["min"]
    record["max_ratio"] = record["ratios"]["L2_over_H1"]["max"]
    return record
