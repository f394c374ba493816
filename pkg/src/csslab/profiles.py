"""Modified blow-up profiles P, P1, P2, their parameter derivatives,
the cubic modulation corrections, the quartic correction T4, and the
profile-equation residuals with beta-scaling sweeps.

Every T-field is a polynomial in the real parameters (b, eta) with complex
coefficient fields,

    T_j^{(k)}(y; b, eta) = sum_{j1+j2=j} b^{j1} eta^{j2} T^{(k)}_{j1,j2}(y),

stored as a dict {(j1, j2): samples}. Real-linear operators (the L_Q
inverse) act entrywise on the coefficients, which is valid because the
monomials are real.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import gauge as GA
from . import grid as G
from . import linops as L
from .grid import Grid, RadialField
from .soliton import q_values, soliton_q


class SolvabilityViolated(ValueError):
    pass


class FitIllConditioned(ValueError):
    pass


class GridTooSmall(ValueError):
    pass


@dataclass(frozen=True)
class ProfileParams:
    b: float
    eta: float

    @property
    def beta(self) -> float:
        return math.hypot(self.b, self.eta)

    @property
    def bbeta(self) -> complex:
        return 1j * self.b + self.eta

    @property
    def B0(self) -> float:
        return self.beta ** -0.5

    @property
    def B1(self) -> float:
        return 1.0 / self.beta


def p3(m: int, params: ProfileParams) -> tuple[float, float]:
    """Cubic corrections to the (b, eta) laws: p3_b - i p3_eta =
    8 pi bbeta^3 / ||yQ||^2 when m = 1, zero otherwise."""
    if m >= 2:
        return 0.0, 0.0
    val = 8.0 * math.pi * params.bbeta**3 / (8.0 * math.pi**2)
    return float(val.real), float(-val.imag)


# ---------------------------------------------------------------------------
# Polynomial-in-(b, eta) algebra over complex coefficient fields


def _padd(*polys):
    out: dict = {}
    for p in polys:
        for key, arr in p.items():
            if key in out:
                out[key] = out[key] + arr
            else:
                out[key] = arr
    return out


def _pneg(p):
    return {k: -v for k, v in p.items()}


def _pscale(p, c):
    """Multiply every coefficient by a scalar or sample array."""
    return {k: v * c for k, v in p.items()}


def _pmul(pa, pb):
    out: dict = {}
    for (i1, j1), a in pa.items():
        for (i2, j2), b in pb.items():
            key = (i1 + i2, j1 + j2)
            term = a * b
            if key in out:
                out[key] = out[key] + term
            else:
                out[key] = term
    return out


def _pderiv(p, wrt: str):
    out: dict = {}
    for (i, j), arr in p.items():
        if wrt == "b" and i > 0:
            out[(i - 1, j)] = i * arr
        elif wrt == "eta" and j > 0:
            out[(i, j - 1)] = j * arr
    return out


def _peval(p, b: float, eta: float, n: int):
    out = np.zeros(n, dtype=np.complex128)
    for (i, j), arr in p.items():
        out = out + (b**i * eta**j) * arr
    return out


def _ath_pol(grid: Grid, pa, pb):
    """Polarized gauge potential A_theta[f, g] of two field polynomials:
    -1/2 int_0^y Re(conj(f) g) y' dy', expanded over the real monomials."""
    out: dict = {}
    for (i1, j1), a in pa.items():
        for (i2, j2), b in pb.items():
            key = (i1 + i2, j1 + j2)
            dens = np.real(np.conj(a) * b)
            term = -0.5 * np.real(G.cumulative_rdr(grid, dens))
            if key in out:
                out[key] = out[key] + term
            else:
                out[key] = term
    return out


def _yq_pairing(grid: Grid, q: np.ndarray, arr: np.ndarray) -> complex:
    """2 pi int_0^inf (yQ) arr y dy with a fitted log-power tail model.

    The integrand decays like (a + b log y + c log^2 y + d/y^2) / y^3, so a
    plain power-law tail correction is three orders short of the accuracy
    the solvability check needs; fit the model on the outer quarter of the
    grid and integrate it analytically past r_max."""
    y = grid.r
    vals = y * q * arr
    base = complex(G.integrate_samples(grid, vals)[0])
    msk = y >= grid.r_max / 4.0
    yy = y[msk]
    w = vals[msk] * yy**4
    basis = np.vstack([np.ones_like(yy), np.log(yy), np.log(yy) ** 2,
                       1.0 / yy**2]).T
    coef, *_ = np.linalg.lstsq(basis, w, rcond=None)
    R, lnR = grid.r_max, math.log(grid.r_max)
    moments = (1.0 / (2 * R**2),
               lnR / (2 * R**2) + 1.0 / (4 * R**2),
               lnR**2 / (2 * R**2) + lnR / (2 * R**2) + 1.0 / (4 * R**2),
               1.0 / (4 * R**4))
    tail = sum(c * mom for c, mom in zip(coef, moments))
    return base + 2.0 * math.pi * tail


def _papply(op, p, index: int, grid: Grid, **kw):
    """Apply a real-linear operation entrywise to coefficient fields."""
    out = {}
    for key, arr in p.items():
        out[key] = op(RadialField(index, arr, grid), **kw).values
    return out


# ---------------------------------------------------------------------------
# T-tables


@dataclass(frozen=True)
class TTable:
    m: int
    grid: Grid
    entries: dict  # name -> poly, names "T{j}_{k}"
    p3_b: dict = field(default_factory=dict)   # scalar polynomials
    p3_eta: dict = field(default_factory=dict)
    solvability: dict = field(default_factory=dict)


_TABLE_CACHE: dict = {}


def _bbeta_poly():
    return {(1, 0): 1j, (0, 1): 1.0 + 0j}


def _p3_polys(m: int):
    """Scalar monomial expansions of p3_b and p3_eta."""
    if m >= 2:
        return {}, {}
    c = 1.0 / math.pi
    # bbeta^3 = -i b^3 - 3 b^2 eta + 3 i b eta^2 + eta^3
    p3b = {(2, 1): -3.0 * c, (0, 3): c}
    p3e = {(3, 0): c, (1, 2): -3.0 * c}
    return p3b, p3e


def build_t_tables(m: int, grid: Grid) -> TTable:
    key = (m, grid.key)
    if key in _TABLE_CACHE:
        return _TABLE_CACHE[key]
    y = grid.r
    q = q_values(m, y)
    rho = L.rho(m, grid).values
    bb = _bbeta_poly()
    qp = {(0, 0): q.astype(complex)}

    t1_1 = _pscale(bb, -(y / 2.0) * q)
    t1_0 = {(1, 0): -1j * (y**2 / 4.0) * q, (0, 1): -(m + 1) * rho}

    bb2 = _pmul(bb, bb)
    t2_2 = _pscale(bb2, (y**2 / 4.0) * q.astype(complex))
    t2_1 = _pmul(_pscale(bb, -(y / 2.0)), t1_0)
    src20 = _padd(
        t2_1,
        _pscale(_pmul(_ath_pol(grid, qp, t1_0), t1_0), 2.0 / y),
        _pscale(_ath_pol(grid, t1_0, t1_0), q / y),
    )
    t2_0 = _papply(lambda f: L.right_inverse(L.OperatorKind("LQ", m), f, "outgoing"),
                   src20, m + 1, grid)

    p3b, p3e = _p3_polys(m)
    # A_Q*((y^2/4) T1^(0)) entrywise (complex-linear operator)
    aqs = L.OperatorKind("AQ_star", m)
    inner32 = _pmul(bb2, _papply(lambda f: L.apply(aqs, f),
                                 _pscale(t1_0, y**2 / 4.0), m + 2, grid))
    solvability = {}
    if m == 1:
        bracket = _padd(
            inner32,
            {k: -(y / 2.0) * q * v for k, v in p3b.items()},
            {k: 1j * (y / 2.0) * q * v for k, v in p3e.items()},
        )
        yq = y * q
        scale = G.l2_samples(grid, yq)
        for mono, arr in bracket.items():
            pair = _yq_pairing(grid, q, arr)
            solvability[mono] = abs(pair) / (scale * max(G.l2_samples(grid, arr), 1e-300))
            if solvability[mono] > 1e-5:
                raise SolvabilityViolated(
                    f"solvability-violated at monomial {mono}: {pair:.3e}")
        # with solvability in hand the outgoing inverse (forward integrals
        # only, no tail truncation) is the decaying solution
        t3_2 = _papply(lambda f: L.right_inverse(aqs, f, "outgoing"),
                       bracket, m + 1, grid)
    else:
        t3_2 = _pmul(bb2, _pscale(t1_0, y**2 / 4.0))

    inner31 = _padd(
        _pmul(_ath_pol(grid, qp, t2_0), qp),
        _pmul(_ath_pol(grid, qp, t1_0), t1_0),
        _pscale(_ath_pol(grid, t1_0, t1_0), 0.5 * q),
    )
    src31 = _padd(t3_2, _pneg(_pmul(bb, inner31)))
    t3_1 = _papply(lambda f: L.right_inverse(L.OperatorKind("AQ", m), f, "outgoing"),
                   src31, m + 2, grid)

    if m == 2:
        bb3 = _pmul(bb2, bb)
        t3_0 = _pscale(bb3, -(y**6 / 384.0) * q.astype(complex))
    else:
        t3_0 = {}

    table = TTable(m=m, grid=grid,
                   entries={"T1_0": t1_0, "T1_1": t1_1,
                            "T2_0": t2_0, "T2_1": t2_1, "T2_2": t2_2,
                            "T3_0": t3_0, "T3_1": t3_1, "T3_2": t3_2},
                   p3_b=p3b, p3_eta=p3e, solvability=solvability)
    _TABLE_CACHE[key] = table
    return table


def solvability_inner(m: int, params: ProfileParams, table: TTable) -> float:
    """Absolute value of the m=1 solvability pairing at the given parameters
    (zero by construction of p3, up to quadrature error)."""
    if m >= 2:
        return 0.0
    grid = table.grid
    y = grid.r
    q = q_values(m, y)
    bb2 = _pmul(_bbeta_poly(), _bbeta_poly())
    aqs = L.OperatorKind("AQ_star", m)
    inner32 = _pmul(bb2, _papply(lambda f: L.apply(aqs, f),
                                 _pscale(table.entries["T1_0"], y**2 / 4.0),
                                 m + 2, grid))
    p3b_v = _peval({k: np.array([v]) for k, v in table.p3_b.items()},
                   params.b, params.eta, 1)[0]
    p3e_v = _peval({k: np.array([v]) for k, v in table.p3_eta.items()},
                   params.b, params.eta, 1)[0]
    vals = _peval(inner32, params.b, params.eta, grid.n) \
        - p3b_v * (y / 2.0) * q + 1j * p3e_v * (y / 2.0) * q
    return abs(_yq_pairing(grid, q, vals))


# ---------------------------------------------------------------------------
# Assembly


@dataclass(frozen=True)
class ProfileSet:
    params: ProfileParams
    P: RadialField
    P1: RadialField
    P2: RadialField
    dP_db: RadialField
    dP_deta: RadialField
    dP1_db: RadialField
    dP1_deta: RadialField
    dP2_db: RadialField
    dP2_deta: RadialField
    cutoffs: bool = True


def _cut_and_derivs(grid: Grid, beta: float, b: float, eta: float, scale_pow: float):
    """chi(y beta^p) with its analytic b- and eta-derivatives;
    scale_pow = 1 for the B1 cutoff, 1/2 for the B0 cutoff."""
    y = grid.r
    arg = y * beta**scale_pow
    chi = G.smooth_bump(arg)
    chi_p = G.smooth_bump_prime(arg)
    # d/db beta^p = p beta^{p-1} (b/beta)
    common = y * chi_p * scale_pow * beta ** (scale_pow - 1.0) / beta
    return chi, common * b, common * eta


def assemble(m: int, params: ProfileParams, table: TTable,
             t4_dir: RadialField | None = None,
             cutoffs: bool = True, beta_max: float = 0.1) -> ProfileSet:
    """Build P, P1, P2 and their analytic (b, eta)-derivatives. With
    cutoffs=False the unlocalized profiles are returned (used for the
    quartic extraction). beta_max > 0.1 extends the chart beyond its
    accuracy range; the decomposition uses this to keep the coordinate
    system defined for large b."""
    grid = table.grid
    if params.beta >= beta_max:
        raise ValueError(
            f"beta = {params.beta} out of range (need < {beta_max})")
    b, eta, beta = params.b, params.eta, params.beta
    y, n = grid.r, grid.n
    q = q_values(m, y)
    e = table.entries

    def group(names):
        poly = _padd(*[e[nm] for nm in names if e[nm]])
        vals = _peval(poly, b, eta, n)
        d_b = _peval(_pderiv(poly, "b"), b, eta, n)
        d_eta = _peval(_pderiv(poly, "eta"), b, eta, n)
        return vals, d_b, d_eta

    v0, v0b, v0e = group(["T1_0", "T2_0", "T3_0"])
    v1, v1b, v1e = group(["T1_1", "T2_1", "T3_1"])
    v2, v2b, v2e = group(["T2_2", "T3_2"])

    if cutoffs and beta == 0.0:
        cutoffs = False  # B1 = infinity: the cutoffs are identically one
    if cutoffs:
        if 2.0 / beta > grid.r_max:
            raise GridTooSmall(
                f"grid-too-small: 2 B1 = {2/beta:g} exceeds r_max = {grid.r_max:g}")
        chi1, dchi1_b, dchi1_e = _cut_and_derivs(grid, beta, b, eta, 1.0)
        p_vals = q + chi1 * v0
        p_db = chi1 * v0b + dchi1_b * v0
        p_de = chi1 * v0e + dchi1_e * v0
        p1_vals = chi1 * v1
        p1_db = chi1 * v1b + dchi1_b * v1
        p1_de = chi1 * v1e + dchi1_e * v1
        p2_vals = chi1 * v2
        p2_db = chi1 * v2b + dchi1_b * v2
        p2_de = chi1 * v2e + dchi1_e * v2
        if t4_dir is not None:
            chi0, dchi0_b, dchi0_e = _cut_and_derivs(grid, beta, b, eta, 0.5)
            t4 = beta**4 * t4_dir.values
            p2_vals = p2_vals + chi0 * t4
            p2_db = p2_db + chi0 * 4.0 * beta**2 * b * t4_dir.values + dchi0_b * t4
            p2_de = p2_de + chi0 * 4.0 * beta**2 * eta * t4_dir.values + dchi0_e * t4
    else:
        p_vals, p_db, p_de = q + v0, v0b, v0e
        p1_vals, p1_db, p1_de = v1, v1b, v1e
        p2_vals, p2_db, p2_de = v2, v2b, v2e
        if t4_dir is not None:
            p2_vals = p2_vals + beta**4 * t4_dir.values
            p2_db = p2_db + 4.0 * beta**2 * b * t4_dir.values
            p2_de = p2_de + 4.0 * beta**2 * eta * t4_dir.values

    mk = lambda idx, vals, decay=None: RadialField(idx, vals, grid, decay)
    return ProfileSet(
        params=params,
        P=mk(m, p_vals, float(m + 2)), P1=mk(m + 1, p1_vals), P2=mk(m + 2, p2_vals),
        dP_db=mk(m, p_db), dP_deta=mk(m, p_de),
        dP1_db=mk(m + 1, p1_db), dP1_deta=mk(m + 1, p1_de),
        dP2_db=mk(m + 2, p2_db), dP2_deta=mk(m + 2, p2_de),
        cutoffs=cutoffs)


def cutoff_cancellation(params: ProfileParams, grid: Grid) -> np.ndarray:
    """The field [(b^2 + eta^2) d_b - b y d_y] chi_{B1}, which vanishes to
    rounding because d_b chi(y beta) = y chi'(y beta) b / beta."""
    y = grid.r
    b, beta = params.b, params.beta
    chi_p = G.smooth_bump_prime(y * beta)
    term_db = (b**2 + params.eta**2) * y * chi_p * (b / beta)
    term_scale = b * y * beta * chi_p
    return term_db - term_scale


# ---------------------------------------------------------------------------
# Modulation vectors


def mod_vectors(m: int, params: ProfileParams, p: ProfileSet):
    """v_k = (Lambda_{-k} P_k, -i P_k, -d_b P_k, -d_eta P_k) for k = 0, 1, 2."""
    trip = ((p.P, p.dP_db, p.dP_deta, 0),
            (p.P1, p.dP1_db, p.dP1_deta, 1),
            (p.P2, p.dP2_db, p.dP2_deta, 2))
    out = []
    for fld, db, de, k in trip:
        lam = G.scale_gen(fld, s=-float(k))
        out.append((lam,
                    fld.with_values(-1j * fld.values, decay=None),
                    db.with_values(-db.values),
                    de.with_values(-de.values)))
    return tuple(out)


# ---------------------------------------------------------------------------
# Residuals


@dataclass(frozen=True)
class ResidualReport:
    params: ProfileParams
    psi_local_sup: dict          # R -> sup_{r <= R} |Psi|
    psi1_weighted_L1: float      # || Psi_1 / y^2 ||_{L^1}
    psi2_L2: float
    psi2_H1: float
    compat1: tuple               # D_P P - P1 in (L2, H1, H2)
    compat2: tuple               # A_P P1 - P2 in (L2, H1, V3/2)
    phase_corr: float            # int_0^infty Re(conj(P) P1) dy
    fields: dict                 # name -> RadialField


def residuals(m: int, params: ProfileParams, p: ProfileSet,
              radii=(2.0, 5.0)) -> ResidualReport:
    """Evaluate the three profile-equation residuals with the formal laws
    (Mod = 0): lambda_s/lambda = -b, gamma_s = -(m+1) eta - I0,
    b_s = -(b^2+eta^2) - p3_b, eta_s = -p3_eta."""
    grid = p.P.grid
    y = grid.r
    b, eta = params.b, params.eta
    p3b, p3e = p3(m, params)
    b_s = -(b**2 + eta**2) - p3b
    eta_s = -p3e

    gf = GA.gauge_fields(p.P)
    dens01 = np.real(np.conj(p.P.values) * p.P1.values)
    i_tail = np.real(G.backward_dy(grid, dens01))
    i0 = float(i_tail[0])
    gamma_s = -(m + 1) * eta - i0

    def lam_k(fld, k):
        return G.scale_gen(fld, s=-float(k)).values

    d_star_p1 = GA.cov_d_star(p.P, p.P1, gf).values
    lhs0 = (b_s * p.dP_db.values + eta_s * p.dP_deta.values
            + b * lam_k(p.P, 0) + 1j * gamma_s * p.P.values
            + 1j * d_star_p1 + 1j * i_tail * p.P.values)
    psi = -1j * lhs0

    a_star_p2 = GA.a_u_star(p.P, p.P2, gf).values
    lhs1 = (b_s * p.dP1_db.values + eta_s * p.dP1_deta.values
            + b * lam_k(p.P1, 1) + 1j * gamma_s * p.P1.values
            + 1j * a_star_p2 + 1j * i_tail * p.P1.values)
    psi1 = -1j * lhs1

    vtd = (m + 2 + gf.a_theta) ** 2 + 0.5 * y**2 * np.abs(p.P.values) ** 2
    htd_p2 = (-G.d_dr(grid, p.P2.values, 2) - G.d_dr(grid, p.P2.values, 1) / y
              + vtd / y**2 * p.P2.values)
    lhs2 = (b_s * p.dP2_db.values + eta_s * p.dP2_deta.values
            + b * lam_k(p.P2, 2) + 1j * gamma_s * p.P2.values
            + 1j * htd_p2 + 1j * i_tail * p.P2.values
            - 1j * np.conj(p.P.values) * p.P1.values**2)
    psi2 = -1j * lhs2

    psi_f = RadialField(m, psi, grid)
    psi1_f = RadialField(m + 1, psi1, grid)
    psi2_f = RadialField(m + 2, psi2, grid)

    local_sup = {R: float(np.max(np.abs(psi[y <= R]))) for R in radii}
    psi1_l1 = float(np.real(G.integrate_samples(grid, np.abs(psi1) / y**2)[0]))

    d_pp = GA.cov_d(p.P, p.P, gf)
    c1 = d_pp.with_values(d_pp.values - p.P1.values)
    a_pp1 = GA.a_u(p.P, p.P1, gf)
    c2 = a_pp1.with_values(a_pp1.values - p.P2.values)
    compat1 = (G.l2(c1), G.hdot1(c1), G.hdotk_hardy(c1, 2))
    compat2 = (G.l2(c2), G.hdot1(c2), math.sqrt(G.v32_sq(c2)))

    return ResidualReport(
        params=params, psi_local_sup=local_sup, psi1_weighted_L1=psi1_l1,
        psi2_L2=G.l2(psi2_f), psi2_H1=G.hdot1(psi2_f),
        compat1=compat1, compat2=compat2, phase_corr=i0,
        fields={"Psi": psi_f, "Psi1": psi1_f, "Psi2": psi2_f})


def taylor_deviations(m: int, params: ProfileParams, table: TTable) -> dict:
    """Sup over y in [2, 2 B1] of the far-field Taylor deviations of the
    T-fields, each normalized by its pointwise envelope:

        |T1^(0) + bbeta (y^2/4) Q|            <= C beta  Q log y
        |T2^(0) - bbeta^2 (y^4/32) Q|
          + y |T2^(1) - bbeta^2 (y^3/8) Q|    <= C beta^2 y^2 Q log y
        m = 1:  |T3^(1)| + y |T3^(2)|         <= C beta^3 y^3 Q log y
        m >= 2: |T3^(1) + bbeta^3 (y^5/64) Q|
          + y |T3^(2) + bbeta^3 (y^4/16) Q|   <= C beta^3 y^3 Q log y
    """
    grid = table.grid
    y = grid.r
    b, eta, bb = params.b, params.eta, params.bbeta
    q = q_values(m, y)
    msk = (y >= 2.0) & (y <= 2.0 / params.beta)
    n = grid.n
    e = table.entries

    def ev(name):
        return _peval(e[name], b, eta, n)

    logy = np.log(y[msk])
    dev1 = np.abs(ev("T1_0") + bb * (y**2 / 4.0) * q)[msk] / (q[msk] * logy)
    dev2 = (np.abs(ev("T2_0") - bb**2 * (y**4 / 32.0) * q)
            + y * np.abs(ev("T2_1") - bb**2 * (y**3 / 8.0) * q))[msk] \
        / (y[msk] ** 2 * q[msk] * logy)
    if m == 1:
        raw3 = np.abs(ev("T3_1")) + y * np.abs(ev("T3_2"))
    else:
        raw3 = (np.abs(ev("T3_1") + bb**3 * (y**5 / 64.0) * q)
                + y * np.abs(ev("T3_2") + bb**3 * (y**4 / 16.0) * q))
    dev3 = raw3[msk] / (y[msk] ** 3 * q[msk] * logy)
    return {"t1_dev": float(dev1.max()), "t2_dev": float(dev2.max()),
            "t3_dev": float(dev3.max())}


# ---------------------------------------------------------------------------
# Quartic profile T4


def build_t4(m: int, grid: Grid, direction: tuple[float, float],
             s_values=None, degrees=range(3, 9),
             cond_threshold: float = 1e9) -> RadialField:
    """Extract the quartic coefficient F4 of the P2-equation residual along
    the given unit (b, eta)-direction (cutoffs removed, T4 omitted) by a
    per-node least-squares fit in s over a geometric ladder, then return
    T4 = -out Htd_Q^{-1} F4 (m = 1) or -inn Htd_Q^{-1} F4 (m >= 2)."""
    db, de = direction
    norm = math.hypot(db, de)
    db, de = db / norm, de / norm
    if s_values is None:
        s_values = [0.03 * 2.0 ** (-j / 2.0) for j in range(6)]
    table = build_t_tables(m, grid)
    rows = []
    for s in s_values:
        params = ProfileParams(s * db, s * de)
        pset = assemble(m, params, table, t4_dir=None, cutoffs=False)
        rep = residuals(m, params, pset)
        rows.append(rep.fields["Psi2"].values)
    smat = np.array([[s**d for d in degrees] for s in s_values])
    scale = np.array([max(abs(min(s_values)), abs(max(s_values))) ** d
                      for d in degrees])
    cond = np.linalg.cond(smat / scale)
    if cond > cond_threshold:
        raise FitIllConditioned(f"fit-ill-conditioned: cond = {cond:.3e}")
    coef, *_ = np.linalg.lstsq(smat, np.array(rows), rcond=None)
    f4 = coef[list(degrees).index(4)]
    kind = L.OperatorKind("HtdQ", m)
    branch = "outgoing" if m == 1 else "inner"
    inv = L.right_inverse(kind, RadialField(m + 2, f4, grid), branch)
    return RadialField(m + 2, -inv.values, grid)


def quartic_coefficient(m: int, grid: Grid, direction: tuple[float, float],
                        t4_dir: RadialField | None = None,
                        s_values=None, degrees=range(3, 9)) -> np.ndarray:
    """The fitted s^4 coefficient of the Psi2 residual (with the optional
    T4 correction included); used by the re-extraction consistency check."""
    db, de = direction
    norm = math.hypot(db, de)
    db, de = db / norm, de / norm
    if s_values is None:
        s_values = [0.03 * 2.0 ** (-j / 2.0) for j in range(6)]
    table = build_t_tables(m, grid)
    rows = []
    for s in s_values:
        params = ProfileParams(s * db, s * de)
        pset = assemble(m, params, table, t4_dir=t4_dir, cutoffs=False)
        rep = residuals(m, params, pset)
        rows.append(rep.fields["Psi2"].values)
    smat = np.array([[s**d for d in degrees] for s in s_values])
    coef, *_ = np.linalg.lstsq(smat, np.array(rows), rcond=None)
    return coef[list(degrees).index(4)]


# ---------------------------------------------------------------------------
# Scaling sweep


def scaling_sweep(m: int, betas, direction: tuple[float, float],
                  grid: Grid | None = None, include_t4: bool = True) -> dict:
    """Log-log slope fits of the residual norms against beta."""
    if grid is None:
        grid = G.default_grid()
    db, de = direction
    norm = math.hypot(db, de)
    db, de = db / norm, de / norm
    table = build_t_tables(m, grid)
    t4_dir = build_t4(m, grid, (db, de)) if include_t4 else None
    series: dict[str, list[float]] = {
        "psi_sup_R2": [], "psi_sup_R5": [], "psi1_L1w": [],
        "psi2_L2": [], "psi2_H1": [], "phase_corr_dev": [],
        "t1_dev": [], "t2_dev": [], "t3_dev": [],
    }
    for beta in betas:
        params = ProfileParams(beta * db, beta * de)
        pset = assemble(m, params, table, t4_dir=t4_dir)
        rep = residuals(m, params, pset)
        series["psi_sup_R2"].append(rep.psi_local_sup[2.0])
        series["psi_sup_R5"].append(rep.psi_local_sup[5.0])
        series["psi1_L1w"].append(rep.psi1_weighted_L1)
        series["psi2_L2"].append(rep.psi2_L2)
        series["psi2_H1"].append(rep.psi2_H1)
        series["phase_corr_dev"].append(
            abs(rep.phase_corr + 2.0 * (m + 1) * params.eta))
        for name, val in taylor_deviations(m, params, table).items():
            series[name].append(val)
    logb = np.log(np.asarray(betas, dtype=float))
    out = {"m": m, "betas": list(betas), "direction": (db, de),
           "include_t4": include_t4, "series": series, "slopes": {}}
    for name, vals in series.items():
        v = np.asarray(vals)
        if np.all(v > 0):
            slope, intercept = np.polyfit(logb, np.log(v), 1)
            out["slopes"][name] = {"slope": float(slope),
                                   "intercept": float(intercept)}
        else:
            out["slopes"][name] = {"slope": float("nan"), "intercept": float("nan")}
    return out
