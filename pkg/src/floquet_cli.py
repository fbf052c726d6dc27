#!/usr/bin/env python3
"""
Command line front end for Floquet analysis on periodic time scales.

    floquet_cli.py analyze   CONFIG [--grid N] [--timing]
    floquet_cli.py decompose CONFIG --out DIR [--grid N] [--horizon H]
    floquet_cli.py simulate  CONFIG --out DIR [--x0 a,b,...] [--t-end T] [--grid N]
    floquet_cli.py periodic  CONFIG
    floquet_cli.py transform CONFIG [--grid N]
    floquet_cli.py verify    CONFIG [--grid N]

Reports go to standard output as JSON; diagnostics go to standard error.
Exit codes: 0 success, 1 failed verification, 2 configuration error,
3 numerical failure.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from errors import ConfigError, FloquetError, ResonanceError
from expr import evaluate, parse_expression
from floquet import (
    classify_stability,
    dynamic_eigenpairs,
    eigenvector_residual,
    exp_R,
    exponent_table,
    lyapunov_factor,
    modal_basis,
    mode_solution,
    monodromy,
    periodic_solution_homogeneous,
    periodic_solution_nonhomogeneous,
    periodicity_residual,
    shifted_decomposition,
    shifted_exponent_residual,
    spectral_mapping_residual,
    verify_decomposition,
)
from lyapunov import LyapunovTransformation, preservation_check, transform_system, verify_lyapunov
from reports import (
    dumps_report,
    matrix_rows,
    safe_output_path,
    write_matrix_csv,
    write_trajectory_csv,
)
from system_config import load_config
from transition import peano_baker, solve_nonhomogeneous, transition_matrix, transition_path
from utils import log

DEFAULT_GRID = 5
SIMULATE_GRID = 101

# Absolute tolerances of the verify suite
TOL_EXP_R_CLOSURE = 1e-9
TOL_L_PERIODICITY = 1e-6
TOL_DECOMPOSITION = 1e-5
TOL_SPECTRAL_MAPPING = 1e-7
TOL_SHIFTED_EXPONENT = 1e-8
TOL_EIGENVECTOR = 1e-8
TOL_MULTIPLIER_T0 = 1e-7
TOL_SHIFTED_DECOMPOSITION = 1e-8
TOL_PEANO_BAKER = 1e-6
TOL_MODE_SHIFT = 1e-6
TOL_MODE_RECONSTRUCTION = 1e-6
TOL_COCYCLE = 1e-7
TOL_PRESERVATION = 5e-5


def sample_points(ts, start, end, count, h_max):
    """About count TimePoints of T spread evenly over [start, end], both ends included when in T."""
    span = end - start
    spacing = h_max if count < 2 or span <= 0 else min(h_max, span / (count - 1))
    points = ts.grid(start, end, spacing)
    if len(points) <= count:
        return points
    idx = np.unique(np.round(np.linspace(0, len(points) - 1, count)).astype(int))
    return [points[i] for i in idx]


def _parse_vector(text, n):
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) != n:
        raise argparse.ArgumentTypeError(f"--x0 needs {n} comma-separated values, got {len(parts)}")
    values = []
    for part in parts:
        e = parse_expression(part)
        if not e.is_constant:
            raise argparse.ArgumentTypeError(f"--x0 entry {part!r} depends on t")
        values.append(evaluate(e, 0.0))
    return np.array(values, dtype=complex)


def _load(args):
    cfg = load_config(args.config)
    sys_ = cfg.build_system()
    ts = cfg.timescale
    log(f"Loaded {cfg.name}: n={cfg.dimension}, time scale {ts.name}, period {ts.period}")
    return cfg, sys_


def _system_summary(cfg):
    return {
        "name": cfg.name,
        "dimension": cfg.dimension,
        "period": cfg.timescale.period,
        "t0": cfg.t0,
        "timescale": cfg.timescale.describe(),
    }


def _multiplier_entries(verdict):
    return [
        {
            "value": e.value,
            "modulus": e.modulus,
            "algebraic_multiplicity": e.algebraic_multiplicity,
            "geometric_multiplicity": e.geometric_multiplicity,
            "unit_modulus": e.unit_modulus,
            "marginal": e.marginal,
        }
        for e in verdict.evidence
    ]


def _one_period(cfg, count):
    ts = cfg.timescale
    return sample_points(ts, cfg.t0, cfg.t0 + ts.period, count, cfg.options.h_max)


# =============================================================================
# COMMANDS
# =============================================================================


def cmd_analyze(args):
    cfg, sys_ = _load(args)
    started = time.perf_counter()
    fd = monodromy(sys_, cfg.t0, cfg.options)
    verdict = classify_stability(fd)
    grid = _one_period(cfg, args.grid)
    decomposition = verify_decomposition(fd, grid)
    end = fd.ts.shift(fd.t0, 1)
    report = {
        "system": _system_summary(cfg),
        "monodromy": matrix_rows(fd.monodromy),
        "multipliers": _multiplier_entries(verdict),
        "exponents": exponent_table(fd),
        "verdict": verdict.classification,
        "evidence": {"marginal": verdict.marginal},
        "residuals": {
            "decomposition": decomposition["max_residual"],
            "l_periodicity": periodicity_residual(fd, grid),
            "spectral_mapping": max(spectral_mapping_residual(fd, t) for t in grid),
            "exp_r_closure": float(np.linalg.norm(exp_R(fd, end, fd.t0) - fd.monodromy, 2)),
        },
    }
    if args.timing:
        report["timing"] = {"seconds": time.perf_counter() - started}
    sys.stdout.write(dumps_report(report))
    log(f"✅ Verdict: {verdict.classification}")
    return 0


def cmd_decompose(args):
    cfg, sys_ = _load(args)
    fd = monodromy(sys_, cfg.t0, cfg.options)
    ts = fd.ts
    horizon = ts.period if args.horizon is None else args.horizon
    points = sample_points(ts, cfg.t0, cfg.t0 + horizon, args.grid, cfg.options.h_max)
    points = [p for p in points if p >= fd.t0]
    phis = transition_path(sys_, points, fd.t0, cfg.options)
    times = [ts.to_real(p) for p in points]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "L.csv": [(t, lyapunov_factor(fd, p)) for t, p in zip(times, points, strict=True)],
        "eR.csv": [(t, exp_R(fd, p, fd.t0)) for t, p in zip(times, points, strict=True)],
        "Phi.csv": list(zip(times, phis, strict=True)),
    }
    written = []
    for name, samples in files.items():
        path = safe_output_path(out, name)
        write_matrix_csv(path, samples)
        written.append(str(path))
        log(f"✅ Wrote {path}")
    report = {"command": "decompose", "files": written, "points": len(points)}
    sys.stdout.write(dumps_report(report))
    return 0


def cmd_simulate(args):
    cfg, sys_ = _load(args)
    ts = sys_.ts
    opts = cfg.options
    x0 = _parse_vector(args.x0, cfg.dimension) if args.x0 else np.ones(cfg.dimension, dtype=complex)
    t_end = cfg.t0 + ts.period if args.t_end is None else args.t_end
    if t_end < cfg.t0:
        raise ConfigError(f"--t-end {t_end} is before t0 = {cfg.t0}")
    points = sample_points(ts, cfg.t0, t_end, args.grid, opts.h_max)
    tp0 = ts.locate(cfg.t0)
    points = [p for p in points if p >= tp0]
    if cfg.forcing is None:
        states = [phi @ x0 for phi in transition_path(sys_, points, tp0, opts)]
    else:
        states = []
        x, previous = x0, tp0
        for p in points:
            x = solve_nonhomogeneous(sys_, cfg.forcing, x, p, opts, previous)
            states.append(x)
            previous = p
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = safe_output_path(out, "trajectory.csv")
    write_trajectory_csv(path, [(ts.to_real(p), x) for p, x in zip(points, states, strict=True)])
    log(f"✅ Wrote {path}")
    report = {"command": "simulate", "files": [str(path)], "points": len(points)}
    sys.stdout.write(dumps_report(report))
    return 0


def cmd_periodic(args):
    cfg, sys_ = _load(args)
    fd = monodromy(sys_, cfg.t0, cfg.options)
    state = periodic_solution_homogeneous(fd)
    report = {"system": _system_summary(cfg)}
    if state is None:
        report["homogeneous"] = {"initial_state": None, "reason": "no Floquet multiplier equals 1"}
    else:
        report["homogeneous"] = {
            "initial_state": state.initial_state,
            "multiplier": state.multiplier,
            "closure": state.closure,
        }
    if cfg.forcing is not None:
        try:
            x0 = periodic_solution_nonhomogeneous(sys_, cfg.forcing, cfg.t0, cfg.options)
        except ResonanceError as e:
            report["nonhomogeneous"] = {
                "initial_state": None,
                "reason": str(e),
                "homogeneous_state": e.homogeneous_state,
            }
        else:
            end = fd.ts.shift(fd.t0, 1)
            x_end = solve_nonhomogeneous(sys_, cfg.forcing, x0, end, cfg.options, fd.t0)
            closure = float(np.linalg.norm(x_end - x0))
            report["nonhomogeneous"] = {"initial_state": x0, "closure": closure}
    sys.stdout.write(dumps_report(report))
    return 0


def cmd_transform(args):
    cfg, sys_ = _load(args)
    fd = monodromy(sys_, cfg.t0, cfg.options)
    ts = fd.ts
    lt = LyapunovTransformation.from_floquet(fd)
    h_check = max(cfg.options.h_max, ts.period / 32)
    check = verify_lyapunov(lt, ts, horizon=2 * ts.period, h_max=h_check, start=cfg.t0)
    G = transform_system(sys_, lt, cfg.options)
    samples = [
        {"t": ts.to_real(p), "G": matrix_rows(G.matrix_at(p))}
        for p in _one_period(cfg, args.grid)
        if p < ts.shift(fd.t0, 1)
    ]
    report = {
        "system": _system_summary(cfg),
        "lyapunov": check,
        "transformed": samples,
        "preservation": preservation_check(fd, cfg.options),
    }
    sys.stdout.write(dumps_report(report))
    return 0


def _check(name, value, tolerance):
    return {
        "name": name,
        "value": float(value),
        "tolerance": tolerance,
        "passed": bool(value <= tolerance),
    }


def _multiset_distance(a, b):
    remaining = list(b)
    worst = 0.0
    for z in a:
        j = int(np.argmin([abs(z - w) for w in remaining]))
        worst = max(worst, abs(z - remaining.pop(j)))
    return worst


def _cocycle_residual(sys_, points, opts):
    """max ||Phi(c, a) - Phi(c, b) Phi(b, a)|| / max(1, ||Phi(c, a)||) with a, c the grid ends."""
    a, c = points[0], points[-1]
    whole = transition_matrix(sys_, c, a, opts)
    scale = max(1.0, float(np.linalg.norm(whole, 2)))
    worst = 0.0
    for b in points[1:-1]:
        split = transition_matrix(sys_, c, b, opts) @ transition_matrix(sys_, b, a, opts)
        worst = max(worst, float(np.linalg.norm(split - whole, 2)) / scale)
    return worst


def cmd_verify(args):
    cfg, sys_ = _load(args)
    opts = cfg.options
    fd = monodromy(sys_, cfg.t0, opts)
    ts = fd.ts
    grid = _one_period(cfg, args.grid)
    end = ts.shift(fd.t0, 1)
    M_norm = max(1.0, float(np.linalg.norm(fd.monodromy, 2)))
    closure = np.linalg.norm(exp_R(fd, end, fd.t0) - fd.monodromy, 2) / M_norm
    checks = [
        _check("exp_r_closure", closure, TOL_EXP_R_CLOSURE),
        _check("l_at_t0", np.linalg.norm(lyapunov_factor(fd, fd.t0) - np.eye(fd.n), 2), 0.0),
        _check("l_periodicity", periodicity_residual(fd, grid), TOL_L_PERIODICITY),
        _check("decomposition", verify_decomposition(fd, grid)["max_residual"], TOL_DECOMPOSITION),
        _check(
            "spectral_mapping",
            max(spectral_mapping_residual(fd, t) for t in grid),
            TOL_SPECTRAL_MAPPING,
        ),
        _check(
            "shifted_exponents",
            max(shifted_exponent_residual(fd, k) for k in range(-2, 3)),
            TOL_SHIFTED_EXPONENT,
        ),
        _check(
            "eigenvectors_of_r", max(eigenvector_residual(fd, t) for t in grid), TOL_EIGENVECTOR
        ),
    ]

    later = grid[len(grid) // 2]
    if later != fd.t0:
        other = monodromy(sys_, later, opts)
        distance = _multiset_distance(fd.multipliers, other.multipliers)
        checks.append(_check("multipliers_independent_of_t0", distance, TOL_MULTIPLIER_T0))

    shifted = shifted_decomposition(fd, 1)
    worst = 0.0
    for t in grid:
        lhs = shifted.lyapunov_factor(t) @ shifted.exp_R(t, fd.t0)
        rhs = lyapunov_factor(fd, t) @ exp_R(fd, t, fd.t0)
        worst = max(worst, float(np.linalg.norm(lhs - rhs, 2)))
    checks.append(_check("shifted_decomposition", worst, TOL_SHIFTED_DECOMPOSITION))

    modes = [mode_solution(fd, i) for i in range(fd.spectrum.k)]
    shift = max(mode.shift_residual(t) for mode in modes for t in grid)
    checks.append(_check("mode_solution_shift", shift, TOL_MODE_SHIFT))
    basis = modal_basis(fd)
    pairs = dynamic_eigenpairs(sys_, basis.exponents, fd.t0, opts, basis.basis)
    rebuilt = max(pairs.reconstruction(t) for t in grid)
    checks.append(_check("mode_reconstruction", rebuilt, TOL_MODE_RECONSTRUCTION))
    checks.append(_check("transition_cocycle", _cocycle_residual(sys_, grid, opts), TOL_COCYCLE))

    A_scale = max(float(np.linalg.norm(sys_.matrix_at(p), 2)) for p in grid) * ts.period
    if A_scale <= 2:
        diff = peano_baker(sys_, end, fd.t0, opts) - transition_matrix(sys_, end, fd.t0, opts)
        checks.append(_check("peano_baker", np.linalg.norm(diff, 2), TOL_PEANO_BAKER))

    lt = LyapunovTransformation.from_floquet(fd)
    h_check = max(opts.h_max, ts.period / 32)
    bounds = verify_lyapunov(lt, ts, horizon=ts.period, h_max=h_check, start=cfg.t0)
    inverse_violation = 0.0 if bounds["inverse_bound_holds"] else 1.0
    checks.append(_check("lyapunov_inverse_bound", inverse_violation, 0.0))
    preservation = preservation_check(fd, opts)
    checks.append(_check("preservation_phi_g", preservation["phi_g_vs_exp_r"], TOL_PRESERVATION))
    checks.append(_check("preservation_verdict", 0.0 if preservation["match"] else 1.0, 0.0))

    failed = [c["name"] for c in checks if not c["passed"]]
    for c in checks:
        marker = "✅" if c["passed"] else "❌"
        log(f"{marker} {c['name']}: {c['value']:.3e} (tol {c['tolerance']:.1e})")
    report = {"system": _system_summary(cfg), "checks": checks, "passed": not failed}
    sys.stdout.write(dumps_report(report))
    if failed:
        log(f"Failed checks: {', '.join(failed)}", "error")
        return 1
    return 0


COMMANDS = {
    "analyze": cmd_analyze,
    "decompose": cmd_decompose,
    "simulate": cmd_simulate,
    "periodic": cmd_periodic,
    "transform": cmd_transform,
    "verify": cmd_verify,
}


def build_parser():
    parser = argparse.ArgumentParser(
        description="Floquet analysis of periodic systems on time scales"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="JSON system description")
        p.add_argument(
            "--grid",
            type=int,
            default=SIMULATE_GRID if name == "simulate" else DEFAULT_GRID,
            help="Number of sample times",
        )
        if name in ("decompose", "simulate"):
            p.add_argument("--out", required=True, help="Directory for CSV output")
        if name == "decompose":
            p.add_argument(
                "--horizon",
                type=float,
                default=None,
                help="Sampled span after t0 (default: one period)",
            )
        if name == "simulate":
            p.add_argument(
                "--x0", default=None, help="Initial state, comma separated (default: all ones)"
            )
            p.add_argument(
                "--t-end", type=float, default=None, help="Final time (default: t0 + period)"
            )
        if name == "analyze":
            p.add_argument(
                "--timing", action="store_true", help="Include wall-clock timing in the report"
            )
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.grid < 2:
        parser.error("--grid must be at least 2")
    try:
        return COMMANDS[args.command](args)
    except argparse.ArgumentTypeError as e:
        log(str(e), "error")
        return 2
    except FileNotFoundError as e:
        log(f"Config not found: {e.filename}", "error")
        return 2
    except FloquetError as e:
        log(str(e), "error")
        return e.exit_code
    except np.linalg.LinAlgError as e:
        log(f"Linear algebra failure: {e}", "error")
        return 3


if __name__ == "__main__":
    sys.exit(main())
