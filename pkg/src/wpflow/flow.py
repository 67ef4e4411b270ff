"""Time stepping, trajectory diagnostics and a-priori estimate checks."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .constraints import ConstraintSpec, m_M_probe, retract_to_manifold
from .errors import (
    DegenerateDirection,
    InfeasibleInitial,
    LineSearchStall,
    MarginCollapse,
    NoConvergence,
    StepFailure,
)
from .functionals import PhaseState, PotentialParams, make_state, sobolev_ratios
from .grid import Grid
from .neumann import NeumannPlan
from .stepper import StepConfig, StepReport, proximal_step

log = logging.getLogger(__name__)

DIAGNOSTIC_COLUMNS = (
    "step", "t", "E", "F", "mean", "A", "B", "margin",
    "el_residual", "a1_residual", "a2_residual", "inner_iters",
)


@dataclass(frozen=True)
class RunConfig:
    spec: ConstraintSpec
    potential: PotentialParams
    grid: Grid
    tau: float
    t_end: float
    step_cfg: StepConfig | None = None
    margin_floor: float = 1e-8
    snapshot_every: int = 1

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        if not (self.t_end >= 0.0 and math.isfinite(self.t_end)):
            raise ValueError(f"t_end must be non-negative, got {self.t_end}")
        if self.t_end / self.tau > 1e7:
            raise ValueError("t_end / tau exceeds 1e7 steps")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be at least 1")
        if self.step_cfg is None:
            object.__setattr__(self, "step_cfg", StepConfig(tau=self.tau))
        elif self.step_cfg.tau != self.tau:
            object.__setattr__(self, "step_cfg", replace(self.step_cfg, tau=self.tau))

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.t_end / self.tau - 1e-9))


@dataclass
class Trajectory:
    """States are kept every ``snapshot_every`` steps (and at the end);
    diagnostics rows and reports are kept for every step."""

    grid: Grid
    tau: float
    E0: float
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    status: str = "running"
    sobolev_max: list = field(default_factory=lambda: [0.0, 0.0])
    h2_mu_max: float = 0.0
    d35: float = 0.0

    @property
    def final(self) -> PhaseState:
        return self.states[-1]

    def summary(self, plan: NeumannPlan | None = None) -> dict:
        plan = plan or NeumannPlan(self.grid)
        margins = [r["margin"] for r in self.rows] or [self.states[0].margin]
        kappa = 0.0
        for rep in self.reports:
            kappa = max(kappa, abs(rep.B) / (1.0 + math.sqrt(rep.step_sq) / self.tau))
        return {
            "status": self.status,
            "steps": len(self.rows),
            "observed_m_M": m_M_probe(self.states, plan),
            "min_margin": min(margins),
            "max_abs_A": max((abs(r.A) for r in self.reports), default=0.0),
            "max_abs_B": max((abs(r.B) for r in self.reports), default=0.0),
            "kappa_fit": kappa,
            "d35_accumulator": self.d35,
            "C1_fit_H1": self.sobolev_max[0],
            "C1_fit_H2": self.sobolev_max[1],
        }


def _row(step, t, state, rep):
    return {
        "step": step, "t": t, "E": state.energy_E, "F": state.area_F,
        "mean": state.mean_v, "A": rep.A, "B": rep.B, "margin": state.margin,
        "el_residual": rep.el_residual, "a1_residual": rep.a1_residual,
        "a2_residual": rep.a2_residual, "inner_iters": rep.inner_iters,
        "step_sq": rep.step_sq,
    }


def _advance(grid, state, cfg, plan):
    """One step, retried once as two half steps if the solver fails."""
    try:
        return proximal_step(grid, state, cfg.spec, cfg.step_cfg, cfg.potential, plan)
    except (NoConvergence, LineSearchStall) as exc:
        log.warning("step failed (%s); retrying as two half steps", exc)
    half = replace(cfg.step_cfg, tau=0.5 * cfg.tau)
    mid, r1 = proximal_step(grid, state, cfg.spec, half, cfg.potential, plan)
    new, r2 = proximal_step(grid, mid, cfg.spec, half, cfg.potential, plan)
    diff = new.v - state.v
    r2.step_sq = grid.inner(diff, diff)
    r2.inner_iters += r1.inner_iters
    r2.decrease_ok = bool(r1.decrease_ok and r2.decrease_ok)
    r2.substituted = True
    return new, r2


def _track(traj, grid, state, p):
    s1, s2 = sobolev_ratios(grid, state.v, p)
    traj.sobolev_max = [max(traj.sobolev_max[0], s1), max(traj.sobolev_max[1], s2)]


def evolve(v0: np.ndarray, cfg: RunConfig, *, plan: NeumannPlan | None = None) -> Trajectory:
    """Run the scheme from ``v0`` for ``ceil(t_end / tau)`` steps.

    Raises
    ------
    InfeasibleInitial
        ``v0`` violates the constraints.
    MarginCollapse
        The chemical potential became (nearly) constant; the partial
        trajectory is attached.
    StepFailure
        A step failed even after the half-step retry.
    """
    grid, spec, p = cfg.grid, cfg.spec, cfg.potential
    plan = plan or NeumannPlan(grid)
    state = make_state(grid, v0, p)
    if abs(state.mean_v - spec.alpha) > spec.tol_mean or (
        abs(state.area_F - spec.beta) > spec.tol_area * spec.beta
    ):
        raise InfeasibleInitial(
            f"initial mean {state.mean_v:.17g} / area {state.area_F:.17g} "
            f"off ({spec.alpha}, {spec.beta})"
        )
    traj = Trajectory(grid=grid, tau=cfg.tau, E0=state.energy_E)
    traj.times.append(0.0)
    traj.states.append(state)
    _track(traj, grid, state, p)
    if state.margin < cfg.margin_floor:
        traj.status = "margin_collapse"
        raise MarginCollapse(
            f"initial margin {state.margin:.3e} below floor {cfg.margin_floor:.3e}", traj)

    n_steps = cfg.n_steps
    for n in range(1, n_steps + 1):
        try:
            new, rep = _advance(grid, state, cfg, plan)
        except DegenerateDirection as exc:
            traj.status = "margin_collapse"
            raise MarginCollapse(f"step {n}: {exc}", traj) from exc
        except Exception as exc:
            traj.status = "step_failure"
            raise StepFailure(n, exc) from exc
        t = n * cfg.tau
        traj.reports.append(rep)
        traj.rows.append(_row(n, t, new, rep))
        traj.d35 += cfg.tau * (rep.A**2 + rep.B**2 + grid.h2_norm(new.mu) ** 2)
        _track(traj, grid, new, p)
        if n % cfg.snapshot_every == 0 or n == n_steps:
            traj.times.append(t)
            traj.states.append(new)
        state = new
        if state.margin < cfg.margin_floor:
            if traj.states[-1] is not state:
                traj.times.append(t)
                traj.states.append(state)
            traj.status = "margin_collapse"
            raise MarginCollapse(
                f"step {n}: margin {state.margin:.3e} below floor {cfg.margin_floor:.3e}", traj)
    traj.status = "ok"
    return traj


# -- estimate checks ----------------------------------------------------------

@dataclass
class EstimateCheck:
    name: str
    passed: bool
    worst: float
    detail: str = ""

    def line(self):
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag} {self.name:<28} worst={self.worst:.6e} {self.detail}".rstrip()


def check_estimates(traj: Trajectory, *, slack_abs: float = 1e-10,
                    slack_rel: float = 1e-8) -> list[EstimateCheck]:
    """Verify the discrete energy estimates along a trajectory.

    Checks, in order: per-step energy-distance inequality, monotone energy,
    the summed squared increments against ``2 tau E0``, the Hoelder-type
    bound over all stored state pairs, the fitted uniform H2 bound and
    finiteness of the accumulated multiplier/``||mu||_H2`` integral.
    """
    tau, E0 = traj.tau, traj.E0
    E = [E0] + [r["E"] for r in traj.rows]
    checks = []

    worst = -math.inf
    for n, r in enumerate(traj.rows):
        worst = max(worst, r["step_sq"] / (2 * tau) + E[n + 1] - E[n])
    worst = worst if traj.rows else 0.0
    checks.append(EstimateCheck("energy_distance_step", worst <= slack_abs, worst,
                                "max of |dv|^2/(2tau) + E_new - E_old"))

    worst = max((E[n + 1] - E[n] for n in range(len(E) - 1)), default=0.0)
    checks.append(EstimateCheck("energy_monotone", worst <= slack_abs, worst,
                                "max increase of E"))

    total = sum(r["step_sq"] for r in traj.rows)
    bound = 2.0 * tau * E0
    ratio = total / bound if bound > 0 else (0.0 if total == 0 else math.inf)
    checks.append(EstimateCheck("increment_sum", ratio <= 1.0 + slack_rel, ratio,
                                "sum |dv|^2 / (2 tau E0)"))

    worst = 0.0
    g = traj.grid
    for i in range(len(traj.states)):
        for j in range(i + 1, len(traj.states)):
            diff = traj.states[j].v - traj.states[i].v
            lhs = g.inner(diff, diff)
            rhs = 2.0 * E0 * (tau + traj.times[j] - traj.times[i])
            if rhs > 0:
                worst = max(worst, lhs / rhs)
            elif lhs > 0:
                worst = math.inf
    checks.append(EstimateCheck("hoelder_pairs", worst <= 1.0 + slack_rel, worst,
                                "max |v(t2)-v(t1)|^2 / (2 E0 (tau + t2 - t1))"))

    c1 = 0.0
    for st in traj.states:
        c1 = max(c1, (g.h2_norm(st.v) + math.sqrt(2.0 * st.energy_E)) / (1.0 + math.sqrt(E0)))
    checks.append(EstimateCheck("uniform_h2_bound", math.isfinite(c1), c1,
                                "fitted C1 in |v|_H2 + |mu| <= C1 (1 + sqrt E0)"))

    checks.append(EstimateCheck("multiplier_integral", math.isfinite(traj.d35), traj.d35,
                                "sum tau (A^2 + B^2 + |mu|_H2^2)"))
    return checks


def tamper(traj: Trajectory, step: int = 0, bump: float = 1e-3) -> Trajectory:
    """Copy of ``traj`` with one energy value raised (negative control)."""
    rows = [dict(r) for r in traj.rows]
    if rows:
        rows[min(step, len(rows) - 1)]["E"] += bump * (1.0 + traj.E0)
    return replace(traj, rows=rows)


# -- continuous dependence ------------------------------------------------------

@dataclass
class DependenceReport:
    times: np.ndarray
    ratios: np.ndarray
    initial_gap_sq: float
    coincident: bool
    cap: float

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.ratios)))

    @property
    def bounded(self) -> bool:
        return self.finite and bool(np.all(self.ratios <= self.cap))

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios)) if self.ratios.size else 0.0


def continuous_dependence_harness(v0: np.ndarray, delta: np.ndarray, cfg: RunConfig, *,
                                  cap: float = 1e6) -> DependenceReport:
    """Evolve ``v0`` and the retracted ``v0 + delta`` side by side and report

    ``R(t) = (|v1 - v2|^2(t) + 1/2 int_0^t |mu1 - mu2|^2) / |v1 - v2|^2(0)``

    at every step.
    """
    grid = cfg.grid
    v0b = retract_to_manifold(v0 + delta, cfg.spec, cfg.potential, grid)
    gap0 = grid.inner(v0b - v0, v0b - v0)
    if gap0 == 0.0:
        return DependenceReport(np.array([0.0]), np.array([np.nan]), 0.0, True, cap)
    run_cfg = replace(cfg, snapshot_every=1)
    with ThreadPoolExecutor(max_workers=2) as pool:
        runs = list(pool.map(lambda v: evolve(v, run_cfg), (v0, v0b)))
    ta, tb = runs
    ratios = []
    integral = 0.0
    for sa, sb in zip(ta.states, tb.states):
        dv = sa.v - sb.v
        ratios.append((grid.inner(dv, dv) + 0.5 * integral) / gap0)
        dmu = sa.mu - sb.mu
        integral += cfg.tau * grid.inner(dmu, dmu)
    return DependenceReport(np.asarray(ta.times), np.asarray(ratios), gap0, False, cap)
