"""Command-line orchestration and bit-stable report emission.

Verbs: verify (identity/inverse/coercivity/repulsivity batteries), profiles
(residual scaling sweeps), ode (modulation system runs), evolve (split-step
time integration), decompose (single-field tube decomposition), report
(blow-up asymptotics of a recorded run).

All numeric output is serialized with 17 significant digits, so identical
configurations reproduce byte-identical CSV/JSON data files. The manifest
(one per output directory) additionally records the wall time and is the
only non-reproducible file. The default output root comes from the
CSSLAB_OUTPUT_ROOT environment variable.
"""

from __future__ import annotations

import json
import math
import os
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from . import diagnostics as D
from . import gauge as GA
from . import grid as G
from . import linops as L
from . import modulation as MOD
from . import profiles as PR
from .evolve import SolverConfig, run, validate_exact
from .grid import RadialField
from .soliton import blowup_s, soliton_q

ENV_OUTPUT_ROOT = "CSSLAB_OUTPUT_ROOT"


# ---------------------------------------------------------------------------
# 17-significant-digit serialization


def fmt17(x: float) -> str:
    if not math.isfinite(x):
        return '"%s"' % repr(float(x))
    s = format(float(x), ".17g")
    if "." not in s and "e" not in s and "E" not in s:
        s += ".0"
    return s


def dumps17(obj, indent: int = 0) -> str:
    """JSON with floats rendered at 17 significant digits."""
    pad = "  " * indent
    pad_in = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad_in}{json.dumps(str(k))}: {dumps17(v, indent + 1)}'
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        items = [f"{pad_in}{dumps17(v, indent + 1)}" for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt17(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return dumps17({"re": float(obj.real), "im": float(obj.imag)},
                       indent)
    return json.dumps(obj)


def write_json(path: Path, obj) -> None:
    path.write_text(dumps17(obj) + "\n")


def write_csv(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    rows = [",".join(header)]
    n = len(columns[0])
    for i in range(n):
        rows.append(",".join(format(float(c[i]), ".17g") for c in columns))
    path.write_text("\n".join(rows) + "\n")


# ---------------------------------------------------------------------------
# Configuration plumbing


def read_config(path: str | None) -> dict:
    """Flat key-value config file mirroring the CLI flags."""
    if path is None:
        return {}
    cfg = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise click.UsageError(f"config line not 'key = value': {raw!r}")
        key, val = line.split("=", 1)
        cfg[key.strip().replace("-", "_")] = val.strip()
    return cfg


def resolve(name: str, flag_value, cfg: dict, cast, required: bool = False,
            default=None):
    """Flag overrides config file; refuse missing required parameters."""
    if flag_value is not None:
        return flag_value
    if name in cfg:
        return cast(cfg[name])
    if required:
        raise click.UsageError(
            f"missing required parameter --{name.replace('_', '-')} "
            "(flag or config file; physical parameters are never defaulted)")
    return default


def parse_grid(spec: str) -> G.Grid:
    if spec == "default":
        return G.default_grid()
    kw = {}
    for part in spec.split(","):
        key, val = part.split("=")
        key = key.strip()
        if key == "n":
            kw["n"] = int(val)
        elif key in ("r_min", "r_max"):
            kw[key] = float(val)
        else:
            raise click.UsageError(f"unknown grid key {key!r}")
    return G.build_grid(**kw)


def grid_id(grid: G.Grid) -> str:
    return (f"geometric:n={grid.n},r_min={grid.r_min:.17g},"
            f"r_max={grid.r_max:.17g}")


def output_dir(out: str) -> Path:
    root = Path(os.environ.get(ENV_OUTPUT_ROOT, "runs"))
    path = Path(out) if os.path.isabs(out) else root / out
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_manifest(outdir: Path, command: str, config: dict, grid: G.Grid | None,
                   seed: int | None, t_start: float) -> None:
    manifest = {
        "command": command,
        "config": config,
        "grid_id": grid_id(grid) if grid is not None else None,
        "seed": seed,
        "version": __version__,
        "wall_time_s": time.perf_counter() - t_start,
    }
    write_json(outdir / "manifest.json", manifest)


# ---------------------------------------------------------------------------
# verify batteries


def _battery(grid: G.Grid, rng, count: int = 10):
    """Smooth compactly supported complex test fields."""
    y = grid.r
    window = G.smooth_bump(y / 5.0) * (1.0 - G.smooth_bump(y / 0.25))
    fields = []
    for k in range(count):
        c = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        poly = c[0] + c[1] * y + c[2] * y**2
        vals = y**2 * np.exp(-((y - 1.0 - 0.35 * k) ** 2)) * window * poly
        fields.append(vals)
    return fields


def _check(name: str, value: float, tol: float) -> dict:
    return {"name": name, "value": value, "tol": tol,
            "pass": bool(value < tol)}


def suite_identities(grid: G.Grid) -> list[dict]:
    checks = []
    for m in (1, 2, 3):
        q = soliton_q(m, grid)
        y = grid.r
        scale = G.hdot1(q)
        lq = L.OperatorKind("LQ", m)
        checks.append(_check(f"D_QQ_m{m}", G.l2(GA.cov_d(q, q)) / scale, 1e-5))
        checks.append(_check(f"LQ_LambdaQ_m{m}",
                             G.l2(L.apply(lq, G.scale_gen(q))) / scale, 1e-5))
        checks.append(_check(f"LQ_iQ_m{m}",
                             G.l2(L.apply(lq, q.with_values(1j * q.values)))
                             / scale, 1e-5))
        yq = RadialField(m + 1, y * q.values, grid, decay=m + 1)
        checks.append(_check(f"AQ_yQ_m{m}",
                             G.l2(L.apply(L.OperatorKind("AQ", m), yq))
                             / G.l2(yq), 1e-5))
        f = q.with_values(1j * (y**2 / 4.0) * q.values, decay=None)
        tgt = 1j * (y / 2.0) * q.values
        checks.append(_check(
            f"LQ_iy24Q_m{m}",
            G.l2_samples(grid, L.apply(lq, f).values - tgt)
            / G.l2_samples(grid, tgt), 1e-5))
        rho = L.rho(m, grid)
        tgt = y * q.values / (2.0 * (m + 1))
        checks.append(_check(
            f"LQ_rho_m{m}",
            G.l2_samples(grid, L.apply(lq, rho).values - tgt)
            / G.l2_samples(grid, tgt), 1e-5))
        _, mass, _ = GA.energy_mass(q)
        checks.append(_check(f"mass_Q_m{m}",
                             abs(mass / (8.0 * math.pi * (m + 1)) - 1.0), 1e-6))
        ath_inf = float(GA.gauge_fields(q).a_theta[-1])
        checks.append(_check(f"atheta_inf_m{m}",
                             abs(ath_inf / (-2.0 * (m + 1)) - 1.0), 1e-6))
        p_quad = float(np.real(G.integrate_dy(
            grid, (y * q.values.real) ** 2 * y, decay=2 * m + 1)))
        checks.append(_check(f"p_const_m{m}",
                             abs(p_quad / L.p_const(m) - 1.0), 1e-8))
        j1, j1p, j2, j2p = L.j_pair(grid, m)
        wron = j1 * j2p - j1p * j2 - 1.0 / y
        checks.append(_check(f"wronskian_m{m}",
                             float(np.max(np.abs(wron) * y)), 1e-8))
    q1 = soliton_q(1, grid)
    yq_n2 = G.l2_samples(grid, grid.r * q1.values, decay=2) ** 2
    checks.append(_check("yQ_norm2_m1",
                         abs(yq_n2 / (8.0 * math.pi**2) - 1.0), 1e-6))
    return checks


def suite_inverses(grid: G.Grid, seed: int) -> list[dict]:
    rng = np.random.default_rng(seed)
    fields = _battery(grid, rng)
    checks = []
    for tag in ("LQ", "AQ", "AQ_star", "HQ", "HtdQ"):
        kind = L.OperatorKind(tag, 1)
        worst = 0.0
        for vals in fields:
            f = RadialField(kind.range_index, vals, grid)
            inv = L.right_inverse(kind, f, "outgoing")
            err = G.l2_samples(grid, L.apply(kind, inv).values - f.values)
            worst = max(worst, err / G.l2(f))
        checks.append(_check(f"roundtrip_{tag}", worst, 1e-4))
    y = grid.r
    for m in (1, 2, 3):
        j1, j1p, j2, j2p = L.j_pair(grid, m)
        wron = j1 * j2p - j1p * j2 - 1.0 / y
        checks.append(_check(f"wronskian_m{m}",
                             float(np.max(np.abs(wron) * y)), 1e-8))
    return checks


def suite_coercivity(grid: G.Grid, seed: int, samples: int) -> list[dict]:
    w = L.morawetz_weight(0.3, grid)
    checks = [
        _check("repul3_c1_positive", -w.c1, 0.0),
        _check("repul3_c2_positive", -w.c2, 0.0),
    ]
    rng = np.random.default_rng(seed)

    def min_ratio(n):
        vals = []
        for _ in range(n):
            f = L.random_smooth_field(3, 1 + int(rng.integers(0, 2)), grid, rng)
            qf, v32 = L.morawetz_quadform(f, w)
            vals.append(qf / v32)
        return min(vals)

    r1 = min_ratio(samples)
    r2 = min_ratio(2 * samples)
    checks.append(_check("quadform_min_ratio_positive", -r1, 0.0))
    checks.append(_check("quadform_doubling_stability",
                         abs(r2 - r1) / r1, 0.2))
    checks.append({"name": "quadform_min_ratio", "value": r1,
                   "tol": None, "pass": True})
    return checks


def suite_morawetz(grid: G.Grid, delta: float) -> list[dict]:
    try:
        w = L.morawetz_weight(delta, grid, auto_halve=False)
    except L.RepulsivityViolated as exc:
        return [{"name": "repulsivity", "value": None, "tol": None,
                 "pass": False, "error": str(exc)}]
    return [{"name": "repulsivity", "value": None, "tol": None, "pass": True,
             "delta": w.delta, "c1": w.c1, "c2": w.c2}]


# ---------------------------------------------------------------------------
# Trajectory serialization


def _series_columns(t, s, lam, gam, b, eta, b_hat, eta_hat):
    beta_over_lambda = np.hypot(b, eta) / lam
    header = ["t", "s", "lambda", "gamma", "b", "eta", "b_hat", "eta_hat",
              "beta_over_lambda"]
    return header, [t, s, lam, gam, b, eta, b_hat, eta_hat, beta_over_lambda]


def write_series(outdir: Path, t, s, lam, gam, b, eta, b_hat, eta_hat):
    header, cols = _series_columns(np.asarray(t), np.asarray(s),
                                   np.asarray(lam), np.asarray(gam),
                                   np.asarray(b), np.asarray(eta),
                                   np.asarray(b_hat), np.asarray(eta_hat))
    write_csv(outdir / "series.csv", header, cols)


def write_snapshots(outdir: Path, snapshots) -> list[float]:
    snapdir = outdir / "snapshots"
    snapdir.mkdir(exist_ok=True)
    times = []
    for i, (t, u) in enumerate(snapshots):
        write_csv(snapdir / f"snap_{i:04d}.csv", ["r", "re", "im"],
                  [u.grid.r, u.values.real, u.values.imag])
        times.append(float(t))
    return times


# ---------------------------------------------------------------------------
# Commands


@click.group()
@click.version_option(version=__version__)
def main():
    """Numerical laboratory for equivariant self-dual Schroedinger
    dynamics: verification batteries, profile sweeps, modulation ODE and
    PDE runs, decompositions, and run reports."""


@main.command("verify")
@click.argument("suite", type=click.Choice(
    ["identities", "inverses", "coercivity", "morawetz"]))
@click.option("--grid", "grid_spec", default=None,
              help="'default' or 'n=...,r_min=...,r_max=...'")
@click.option("--seed", type=int, default=None)
@click.option("--delta", type=float, default=None,
              help="Morawetz weight delta (morawetz suite).")
@click.option("--samples", type=int, default=None,
              help="Field count for the coercivity suite.")
@click.option("--config", "config_path", default=None)
@click.option("--out", default=None, help="Output directory name.")
@click.pass_context
def cmd_verify(ctx, suite, grid_spec, seed, delta, samples, config_path, out):
    """Run a named assertion battery; exit 0 iff every check passes."""
    t_start = time.perf_counter()
    cfg = read_config(config_path)
    grid_spec = resolve("grid", grid_spec, cfg, str, required=True)
    seed = resolve("seed", seed, cfg, int, default=20230817)
    delta = resolve("delta", delta, cfg, float, default=0.3)
    samples = resolve("samples", samples, cfg, int, default=50)
    grid = parse_grid(grid_spec)
    if suite == "identities":
        checks = suite_identities(grid)
    elif suite == "inverses":
        checks = suite_inverses(grid, seed)
    elif suite == "coercivity":
        checks = suite_coercivity(grid, seed, samples)
    else:
        checks = suite_morawetz(grid, delta)
    n_fail = sum(not c["pass"] for c in checks)
    report = {"suite": suite, "grid_id": grid_id(grid),
              "n_checks": len(checks), "n_failed": n_fail, "checks": checks}
    click.echo(dumps17(report))
    if out is not None:
        outdir = output_dir(out)
        write_json(outdir / "report.json", report)
        write_manifest(outdir, "verify " + suite,
                       {"suite": suite, "grid": grid_spec, "seed": seed,
                        "delta": delta, "samples": samples},
                       grid, seed, t_start)
    if n_fail:
        for c in checks:
            if not c["pass"]:
                click.echo(f"FAILED: {c['name']}: "
                           f"{c.get('error', c['value'])}", err=True)
        ctx.exit(1)


@main.command("profiles")
@click.option("--m", "m", type=int, default=None)
@click.option("--betas", default=None, help="Comma-separated beta sweep.")
@click.option("--direction", default=None, help="b,eta direction, e.g. 1,0")
@click.option("--t4/--no-t4", "with_t4", default=True)
@click.option("--grid", "grid_spec", default=None)
@click.option("--config", "config_path", default=None)
@click.option("--out", default=None)
def cmd_profiles(m, betas, direction, with_t4, grid_spec, config_path, out):
    """Residual scaling sweep of the modified profiles."""
    t_start = time.perf_counter()
    cfg = read_config(config_path)
    m = resolve("m", m, cfg, int, required=True)
    betas = resolve("betas", betas, cfg, str, required=True)
    direction = resolve("direction", direction, cfg, str, default="1,0")
    grid_spec = resolve("grid", grid_spec, cfg, str, required=True)
    grid = parse_grid(grid_spec)
    beta_list = [float(x) for x in betas.split(",")]
    if any(b >= 0.1 for b in beta_list):
        raise click.UsageError("betas must be < 1/10")
    db, de = (float(x) for x in direction.split(","))
    sweep = PR.scaling_sweep(m, beta_list, (db, de), grid=grid,
                             include_t4=with_t4)
    report = {"m": m, "betas": beta_list, "direction": [db, de],
              "include_t4": with_t4, "slopes": sweep["slopes"],
              "series": sweep["series"]}
    if m == 1:
        table = PR.build_t_tables(m, grid)
        norm = math.hypot(db, de)
        report["solvability"] = [
            PR.solvability_inner(m, PR.ProfileParams(b * db / norm,
                                                     b * de / norm), table)
            for b in beta_list]
    click.echo(dumps17(report))
    if out is not None:
        outdir = output_dir(out)
        write_json(outdir / "report.json", report)
        write_manifest(outdir, "profiles",
                       {"m": m, "betas": betas, "direction": direction,
                        "t4": with_t4, "grid": grid_spec},
                       grid, None, t_start)


@main.command("ode")
@click.option("--m", "m", type=int, default=None)
@click.option("--eta0", type=float, default=None)
@click.option("--lam0", type=float, default=None,
              help="Initial scale (default: formal-family value).")
@click.option("--b0", type=float, default=None,
              help="Initial b (default: formal-family value -t0).")
@click.option("--window", default=None, help="t0,t1 (default -100,100)")
@click.option("--p3/--no-p3", "use_p3", default=False)
@click.option("--phase", type=click.Choice(["auto", "leading", "profile"]),
              default="auto")
@click.option("--lam-min", type=float, default=None)
@click.option("--grid", "grid_spec", default=None)
@click.option("--config", "config_path", default=None)
@click.option("--out", default=None)
def cmd_ode(m, eta0, lam0, b0, window, use_p3, phase, lam_min, grid_spec,
            config_path, out):
    """Modulation ODE run; reports the accumulated phase."""
    t_start = time.perf_counter()
    cfg = read_config(config_path)
    m = resolve("m", m, cfg, int, required=True)
    eta0 = resolve("eta0", eta0, cfg, float, required=True)
    window = resolve("window", window, cfg, str, default="-100,100")
    lam_min = resolve("lam_min", lam_min, cfg, float, default=1e-3)
    grid_spec = resolve("grid", grid_spec, cfg, str, default="default")
    t0, t1 = (float(x) for x in window.split(","))
    if b0 is None:
        b0 = -t0
    if lam0 is None:
        lam0 = math.hypot(t0, eta0)
    state0 = MOD.ModState(lam0, 0.0, b0, eta0)
    if phase == "auto":
        phase = "leading" if state0.beta >= 0.1 else "profile"
    grid = parse_grid(grid_spec)
    outres = MOD.ode_integrate(m, state0, (t0, t1), grid=grid,
                               use_p3=use_p3,
                               leading_order=(phase == "leading"),
                               lam_min=lam_min)
    delta_gamma = float(outres["gamma"][-1] - outres["gamma"][0])
    meta = {"m": m, "eta0": eta0, "lam0": lam0, "b0": b0,
            "window": [t0, t1], "use_p3": use_p3, "phase": phase,
            "lam_min": lam_min, "stop": outres["stop"],
            "delta_gamma": delta_gamma,
            "delta_gamma_over_2pi": delta_gamma / (2.0 * math.pi),
            "lambda_final": float(outres["lambda"][-1])}
    if eta0 != 0.0 and not use_p3:
        closed = (m + 1) * (math.atan(t1 / eta0) - math.atan(t0 / eta0))
        meta["delta_gamma_closed_form"] = closed
        meta["delta_gamma_rel_err"] = abs(delta_gamma / closed - 1.0)
    click.echo(dumps17(meta))
    if out is not None:
        outdir = output_dir(out)
        write_series(outdir, outres["t"], outres["s"], outres["lambda"],
                     outres["gamma"], outres["b"], outres["eta"],
                     outres["b"], outres["eta"])
        write_json(outdir / "meta.json", meta)
        write_manifest(outdir, "ode",
                       {"m": m, "eta0": eta0, "lam0": lam0, "b0": b0,
                        "window": window, "p3": use_p3, "phase": phase,
                        "lam_min": lam_min, "grid": grid_spec},
                       grid, None, t_start)


@main.command("evolve")
@click.option("--data", type=click.Choice(["S", "Q"]), default=None)
@click.option("--m", "m", type=int, default=None)
@click.option("--t0", type=float, default=None)
@click.option("--tend", type=float, default=None)
@click.option("--dt", type=float, default=None)
@click.option("--grid", "grid_spec", default=None)
@click.option("--monitor-stride", type=int, default=None)
@click.option("--decompose/--no-decompose", "do_decompose", default=False)
@click.option("--tube-radius", type=float, default=None)
@click.option("--lambda-min", type=float, default=None)
@click.option("--config", "config_path", default=None)
@click.option("--out", default=None)
def cmd_evolve(data, m, t0, tend, dt, grid_spec, monitor_stride,
               do_decompose, tube_radius, lambda_min, config_path, out):
    """Split-step PDE run from a named datum."""
    t_start = time.perf_counter()
    cfg = read_config(config_path)
    data = resolve("data", data, cfg, str, required=True)
    m = resolve("m", m, cfg, int, required=True)
    t0 = resolve("t0", t0, cfg, float, required=True)
    tend = resolve("tend", tend, cfg, float, required=True)
    dt = resolve("dt", dt, cfg, float, default=1e-3)
    grid_spec = resolve("grid", grid_spec, cfg, str, required=True)
    monitor_stride = resolve("monitor_stride", monitor_stride, cfg, int,
                             default=20)
    tube_radius = resolve("tube_radius", tube_radius, cfg, float, default=0.5)
    grid = parse_grid(grid_spec)
    if data == "S":
        u0 = blowup_s(m, t0, grid)
    else:
        u0 = soliton_q(m, grid)
    config = SolverConfig(grid=grid, dt=dt, t_end=tend,
                          lambda_min=lambda_min,
                          monitor_stride=monitor_stride,
                          decompose_flag=do_decompose,
                          tube_radius=tube_radius)
    traj = run(u0, config, t0=t0)
    meta = {"data": data, "m": m, "t0": t0, "t_end": tend, "dt": dt,
            "stop_reason": traj.stop_reason,
            "mass_drift": float(np.max(np.abs(
                traj.series["mass"] - traj.series["mass"][0]))
                / traj.series["mass"][0]),
            "energy_drift": float(np.max(np.abs(
                traj.series["energy"] - traj.series["energy"][0])))}
    if data == "S":
        rep = validate_exact(traj, lambda t: blowup_s(m, t, grid))
        meta["tracking_error_l2_max"] = float(np.max(rep["l2"]))
    if data == "Q":
        rep = validate_exact(traj, lambda t: u0)
        meta["tracking_error_l2_max"] = float(np.max(rep["l2"]))
    click.echo(dumps17(meta))
    if out is not None:
        outdir = output_dir(out)
        write_csv(outdir / "monitors.csv",
                  ["t"] + [k for k in traj.series if k != "t"],
                  [traj.series["t"]] + [traj.series[k] for k in traj.series
                                        if k != "t"])
        if do_decompose:
            td = np.array([tt for tt, _ in traj.decompositions])
            lam = np.array([d.state.lam for _, d in traj.decompositions])
            gam = np.array([d.state.gamma for _, d in traj.decompositions])
            b = np.array([d.state.b for _, d in traj.decompositions])
            eta = np.array([d.state.eta for _, d in traj.decompositions])
            hats = []
            for _, d in traj.decompositions:
                try:
                    hats.append(MOD.corrected_params(d))
                except (PR.GridTooSmall, ValueError):
                    hats.append((math.nan, math.nan))
            hats = np.array(hats)
            s = D._s_ladder(td, lam)
            write_series(outdir, td, s, lam, gam, b, eta,
                         hats[:, 0], hats[:, 1])
        snap_times = write_snapshots(outdir, traj.snapshots)
        meta["snapshot_times"] = snap_times
        write_json(outdir / "meta.json", meta)
        write_manifest(outdir, "evolve",
                       {"data": data, "m": m, "t0": t0, "tend": tend,
                        "dt": dt, "grid": grid_spec,
                        "monitor_stride": monitor_stride,
                        "decompose": do_decompose,
                        "tube_radius": tube_radius,
                        "lambda_min": lambda_min},
                       grid, None, t_start)


@main.command("decompose")
@click.option("--field", "field_path", default=None,
              help="CSV with columns r,re,im on a geometric grid.")
@click.option("--m", "m", type=int, default=None)
@click.option("--tube-radius", type=float, default=None)
@click.option("--config", "config_path", default=None)
@click.option("--out", default=None)
def cmd_decompose(field_path, m, tube_radius, config_path, out):
    """Tube decomposition of a single stored field."""
    t_start = time.perf_counter()
    cfg = read_config(config_path)
    field_path = resolve("field", field_path, cfg, str, required=True)
    m = resolve("m", m, cfg, int, required=True)
    tube_radius = resolve("tube_radius", tube_radius, cfg, float, default=0.2)
    raw = np.loadtxt(field_path, delimiter=",", skiprows=1)
    r, vals = raw[:, 0], raw[:, 1] + 1j * raw[:, 2]
    grid = G.build_grid(r_min=float(r[0]), r_max=float(r[-1]), n=r.size)
    if not np.allclose(grid.r, r, rtol=1e-9):
        raise click.UsageError("field radii are not a geometric grid")
    u = RadialField(m, vals, grid)
    ortho = MOD.build_ortho_profiles(m, grid)
    d = MOD.decompose(u, ortho, tube_radius=tube_radius)
    report = {
        "state": {"lambda": d.state.lam, "gamma": d.state.gamma,
                  "b": d.state.b, "eta": d.state.eta},
        "mu": d.mu, "tube_distance": d.tube_distance,
        "converged": d.converged, "iterations": d.iterations,
        "ortho_residuals": list(d.ortho_residuals),
        "eps_l2": G.l2(d.eps), "eps_hdot1": G.hdot1(d.eps),
        "eps1_l2": G.l2(d.eps1), "eps2_l2": G.l2(d.eps2),
    }
    click.echo(dumps17(report))
    if out is not None:
        outdir = output_dir(out)
        write_json(outdir / "report.json", report)
        write_manifest(outdir, "decompose",
                       {"field": field_path, "m": m,
                        "tube_radius": tube_radius}, grid, None, t_start)


@main.command("report")
@click.argument("rundir", type=click.Path(exists=True))
@click.option("--out", default=None)
def cmd_report(rundir, out):
    """Blow-up asymptotics of a recorded trajectory directory."""
    t_start = time.perf_counter()
    path = Path(rundir) / "series.csv"
    if not path.exists():
        raise click.UsageError(f"no series.csv under {rundir}")
    raw = np.loadtxt(path, delimiter=",", skiprows=1)
    header = path.read_text().splitlines()[0].split(",")
    col = {name: raw[:, i] for i, name in enumerate(header)}
    series = {"t": col["t"], "lambda": col["lambda"], "gamma": col["gamma"],
              "b": col["b"], "eta": col["eta"]}
    report = {"rundir": str(rundir), "n_samples": int(raw.shape[0]),
              "lambda_final": float(col["lambda"][-1])}
    try:
        ell, gamma_star, fits = D.asymptotics(series)
        report["ell"] = ell
        report["gamma_star"] = gamma_star
        report["fits"] = fits
    except D.NoBlowupDetected as exc:
        report["no_blowup_detected"] = str(exc)
    click.echo(dumps17(report))
    if out is not None:
        outdir = output_dir(out)
        write_json(outdir / "report.json", report)
        write_manifest(outdir, "report", {"rundir": str(rundir)}, None,
                       None, t_start)
