"""Command-line front end: ``wpflow init|run|check CONFIG``.

Exit codes: 0 ok, 1 config error, 2 infeasible, 3 numerical failure,
4 margin collapse, 5 check failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from dataclasses import replace
from io import StringIO
from pathlib import Path

import numpy as np

from .checks import brute_force_step, gradient_checks, solver_checks
from .constraints import (
    ConstraintSpec,
    FeasibilityReport,
    construct_feasible,
    minimize_area,
    z_empty_sufficient,
)
from .errors import (
    ConfigError,
    InfeasibleBeta,
    InfeasibleInitial,
    MarginCollapse,
    WPFError,
    ZeroDirection,
)
from .flow import check_estimates, evolve, tamper
from .functionals import W2, make_state
from .grid import Grid
from .io import (
    Config,
    Snapshot,
    initial_direction,
    load_config,
    read_snapshot,
    write_diagnostics,
    write_snapshot,
)
from .neumann import NeumannPlan
from .stepper import StepConfig, proximal_step

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NUMERICAL, EXIT_MARGIN, EXIT_CHECK = range(6)

INITIAL_SNAPSHOT = "v0.snap"
FEASIBILITY_FILE = "feasibility.txt"
DIAGNOSTICS_FILE = "diagnostics.csv"
SUMMARY_FILE = "summary.txt"

log = logging.getLogger("wpflow")


class _Exit(Exception):
    def __init__(self, code, message=""):
        super().__init__(message)
        self.code = code


def _snapshot(cfg: Config, v, t) -> Snapshot:
    return Snapshot(cfg.grid, cfg.a, cfg.alpha, cfg.beta, t, np.asarray(v))


def _snapshot_name(step: int) -> str:
    return f"snap_{step:07d}.snap"


# -- init ----------------------------------------------------------------------------

def build_initial(cfg: Config, out=None):
    """Feasibility report plus the initial field; raises :class:`_Exit` on refusal."""
    out = out or sys.stdout
    grid, p, spec = cfg.grid, cfg.potential, cfg.spec
    beta_alpha, w_alpha, seeds = minimize_area(cfg.alpha, p, grid)
    report = FeasibilityReport(beta_alpha, z_empty_sufficient(spec, p, grid), seeds=seeds)
    lines = list(report.lines())[:2]
    if cfg.beta <= beta_alpha:
        for line in lines:
            print(line, file=out)
        raise _Exit(EXIT_INFEASIBLE,
                    f"beta={cfg.beta} does not exceed the minimal-area estimate {beta_alpha:.12g}")
    try:
        v0, lam = construct_feasible(spec, initial_direction(cfg, grid), p, grid,
                                     w_alpha=w_alpha, beta_alpha=beta_alpha, full_output=True)
    except ZeroDirection as exc:
        raise _Exit(EXIT_CONFIG, f"phi: {exc}") from exc
    except InfeasibleBeta as exc:
        raise _Exit(EXIT_INFEASIBLE, str(exc)) from exc
    state = make_state(grid, v0, p)
    lines += [
        f"lambda = {lam:.17g}",
        f"initial_mean = {state.mean_v:.17g}",
        f"initial_area = {state.area_F:.17g}",
        f"initial_E = {state.energy_E:.17g}",
        f"initial_margin = {state.margin:.17g}",
    ]
    if not report.z_empty_sufficient:
        lines.append("WARNING z_empty_sufficient is false: degenerate feasible states are not "
                     "ruled out; watch the margin")
    return v0, lines


def cmd_init(cfg: Config, out=None) -> int:
    out = out or sys.stdout
    v0, lines = build_initial(cfg, out)
    out_dir = cfg.output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    write_snapshot(out_dir / INITIAL_SNAPSHOT, _snapshot(cfg, v0, 0.0))
    (out_dir / FEASIBILITY_FILE).write_text("\n".join(lines) + "\n")
    for line in lines:
        print(line, file=out)
    print(f"wrote {out_dir / INITIAL_SNAPSHOT}", file=out)
    return EXIT_OK


# -- run -----------------------------------------------------------------------------

def _load_initial(cfg: Config, out):
    path = cfg.output_dir() / INITIAL_SNAPSHOT
    if path.exists():
        snap = read_snapshot(path)
        same = (snap.grid == cfg.grid and snap.a == cfg.a and snap.alpha == cfg.alpha
                and snap.beta == cfg.beta)
        if same:
            return snap.values
        print(f"{path} does not match the config; rebuilding the initial field", file=out)
    cmd_init(cfg, out)
    return read_snapshot(path).values


def _summary_lines(traj, cfg):
    s = traj.summary(NeumannPlan(cfg.grid))
    lines = [
        f"status = {s['status']}",
        f"steps = {s['steps']}",
        f"observed_m_M = {s['observed_m_M']:.17g}",
        f"min_margin = {s['min_margin']:.17g}",
        f"max_abs_A = {s['max_abs_A']:.17g}",
        f"max_abs_B = {s['max_abs_B']:.17g}",
        f"kappa_fit = {s['kappa_fit']:.17g}",
        f"d35_accumulator = {s['d35_accumulator']:.17g}",
        f"C1_fit_H1 = {s['C1_fit_H1']:.17g}",
        f"C1_fit_H2 = {s['C1_fit_H2']:.17g}",
        "estimate checks:",
    ]
    lines += ["  " + c.line() for c in check_estimates(traj)]
    return lines


def _write_outputs(traj, cfg, out_dir: Path, out):
    write_diagnostics(out_dir / DIAGNOSTICS_FILE, traj.rows)
    for t, st in zip(traj.times, traj.states):
        step = int(round(t / cfg.tau))
        write_snapshot(out_dir / _snapshot_name(step), _snapshot(cfg, st.v, t))
    lines = _summary_lines(traj, cfg)
    (out_dir / SUMMARY_FILE).write_text("\n".join(lines) + "\n")
    for line in lines:
        print(line, file=out)


def cmd_run(cfg: Config, out=None) -> int:
    out = out or sys.stdout
    v0 = _load_initial(cfg, out)
    out_dir = cfg.output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        traj = evolve(v0, cfg.run_config())
    except MarginCollapse as exc:
        if exc.trajectory is not None:
            _write_outputs(exc.trajectory, cfg, out_dir, out)
        raise _Exit(EXIT_MARGIN, f"margin collapse: {exc}") from exc
    except InfeasibleInitial as exc:
        raise _Exit(EXIT_INFEASIBLE, str(exc)) from exc
    _write_outputs(traj, cfg, out_dir, out)
    return EXIT_OK


# -- check ---------------------------------------------------------------------------

SHORT_RUN_STEPS = 20
TINY_NODES = 8
TINY_TAU = 1e-2
TINY_FIELDS = 2
TINY_RESTARTS = 100


def _line(out, name, passed, worst, detail=""):
    flag = "PASS" if passed else "FAIL"
    print(f"{flag} {name:<28} worst={worst:.6e} {detail}".rstrip(), file=out)
    return passed


def _tiny_oracle(cfg: Config, rng, out):
    grid = Grid.line(cfg.Lx, TINY_NODES)
    p = cfg.potential
    beta_alpha, w_alpha, _ = minimize_area(cfg.alpha, p, grid)
    if cfg.beta <= beta_alpha:
        return _line(out, "tiny_grid_oracle", True, 0.0,
                     f"skipped: beta below the tiny-grid minimal area {beta_alpha:.6g}")
    spec = ConstraintSpec(cfg.alpha, cfg.beta)
    step_cfg = StepConfig(tau=TINY_TAU, tol_el=min(cfg.tol_el, 1e-8))
    worst = 0.0
    for _ in range(TINY_FIELDS):
        phi = rng.normal(size=grid.shape)
        phi -= grid.mean(phi)
        f = construct_feasible(spec, phi, p, grid, w_alpha=w_alpha, beta_alpha=beta_alpha)
        _, rep = proximal_step(grid, make_state(grid, f, p), spec, step_cfg, p)
        best, hits = brute_force_step(grid, f, spec, TINY_TAU, p, rng, restarts=TINY_RESTARTS)
        if hits == 0:
            return _line(out, "tiny_grid_oracle", False, math.inf, "no feasible restart")
        worst = max(worst, (rep.objective - best) / abs(best))
    return _line(out, "tiny_grid_oracle", worst <= 1e-6, worst,
                 f"(step objective - best restart) / best, {TINY_FIELDS} fields")


def cmd_check(cfg: Config, out=None, tamper_run: bool = False) -> int:
    """Run the invariant suite; exit 5 if any line fails."""
    out = out or sys.stdout
    rng = np.random.default_rng(cfg.seed)
    grid, p = cfg.grid, cfg.potential
    ok = True

    grads = gradient_checks(grid, p, rng, n_fields=10)
    for name in ("F", "E"):
        sel = [g for g in grads if g.functional == name]
        rel = max(g.rel_error for g in sel)
        ratio = float(np.median([g.richardson for g in sel]))
        ok &= _line(out, f"gradient_{name}", rel <= 1e-6 and 50.0 <= ratio <= 200.0, rel,
                    f"median richardson {ratio:.1f}")

    sc = solver_checks(grid, rng)
    ok &= _line(out, "neumann_eigenfunctions", sc.eigen_error <= 1e-12, sc.eigen_error)
    ok &= _line(out, "neumann_self_adjoint", sc.adjoint_error <= 1e-11, sc.adjoint_error)
    ok &= _line(out, "neumann_inverse", sc.inverse_error <= 1e-11, sc.inverse_error)

    ok &= _tiny_oracle(cfg, rng, out)

    v0, _ = build_initial(cfg, out=StringIO())
    n_short = min(SHORT_RUN_STEPS, max(cfg.run_config().n_steps, 1))
    run_cfg = cfg.run_config(t_end=n_short * cfg.tau)
    run_cfg = replace(run_cfg, snapshot_every=1)
    try:
        traj = evolve(v0, run_cfg)
    except MarginCollapse as exc:
        _line(out, "short_evolve", False, math.nan, str(exc))
        raise _Exit(EXIT_CHECK, "check failed") from exc
    a1_worst = 0.0
    for st, rep in zip(traj.states[1:], traj.reports):
        raw = abs(rep.A + rep.B * grid.mean(st.mu) - grid.mean(W2(st.v, p) * st.mu))
        a1_worst = max(a1_worst, raw / (10.0 * cfg.tol_el * (1.0 + abs(rep.A) + abs(rep.B))))
    ok &= _line(out, "multiplier_identity_a1", a1_worst <= 1.0, a1_worst,
                "residual / (10 tol_el (1 + |A| + |B|))")
    if tamper_run:
        print("NOTE tamper: one energy value raised (negative control)", file=out)
        traj = tamper(traj, step=len(traj.rows) // 2)
    for c in check_estimates(traj):
        ok &= _line(out, c.name, c.passed, c.worst, c.detail)
    if not ok:
        raise _Exit(EXIT_CHECK, "check failed")
    return EXIT_OK


# -- entry point ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wpflow", description="Constrained phase-field Willmore flow solver")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("init", "build and write the initial field"),
                       ("run", "evolve and write diagnostics and snapshots"),
                       ("check", "run the invariant suite")):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("config", help="key=value config file")
        if name == "check":
            sp.add_argument("--tamper", action="store_true",
                            help="corrupt one energy value; the suite must then fail")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    start = time.perf_counter()
    try:
        cfg = load_config(args.config)
        if args.command == "init":
            code = cmd_init(cfg)
        elif args.command == "run":
            code = cmd_run(cfg)
        else:
            code = cmd_check(cfg, tamper_run=args.tamper)
    except _Exit as exc:
        if str(exc):
            print(f"error: {exc}", file=sys.stderr)
        code = exc.code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        code = EXIT_CONFIG
    except (InfeasibleBeta, InfeasibleInitial) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        code = EXIT_INFEASIBLE
    except MarginCollapse as exc:
        print(f"margin collapse: {exc}", file=sys.stderr)
        code = EXIT_MARGIN
    except (WPFError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        code = EXIT_NUMERICAL
    log.debug("finished in %.2f s with exit code %d", time.perf_counter() - start, code)
    return code


if __name__ == "__main__":
    sys.exit(main())
