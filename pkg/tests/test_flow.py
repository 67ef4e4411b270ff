import math
from dataclasses import replace

import numpy as np
import pytest

from wpflow import flow
from wpflow.constraints import ConstraintSpec
from wpflow.errors import (
    InfeasibleInitial,
    LineSearchStall,
    MarginCollapse,
    NoConvergence,
    StepFailure,
)
from wpflow.flow import (
    DIAGNOSTIC_COLUMNS,
    RunConfig,
    check_estimates,
    continuous_dependence_harness,
    evolve,
    tamper,
)
from wpflow.functionals import PotentialParams

P = PotentialParams(1.0)


@pytest.fixture
def short_cfg(unit_line, base_spec):
    return RunConfig(base_spec, P, unit_line, tau=1e-3, t_end=0.01, snapshot_every=1)


class TestRunConfig:
    @pytest.mark.parametrize("kwargs", [dict(tau=1.0), dict(t_end=-1.0), dict(t_end=math.inf),
                                        dict(t_end=1e5), dict(snapshot_every=0)])
    def test_invalid(self, unit_line, base_spec, kwargs):
        args = dict(spec=base_spec, potential=P, grid=unit_line, tau=1e-3, t_end=0.1)
        args.update(kwargs)
        with pytest.raises(ValueError):
            RunConfig(**args)

    def test_step_count(self, unit_line, base_spec):
        assert RunConfig(base_spec, P, unit_line, tau=1e-3, t_end=0.1).n_steps == 100
        assert RunConfig(base_spec, P, unit_line, tau=0.03, t_end=0.1).n_steps == 4
        assert RunConfig(base_spec, P, unit_line, tau=0.5, t_end=0.0).n_steps == 0

    def test_step_config_follows_tau(self, unit_line, base_spec):
        from wpflow.stepper import StepConfig
        cfg = RunConfig(base_spec, P, unit_line, tau=2e-3, t_end=0.1,
                        step_cfg=StepConfig(tau=0.5, tol_el=1e-7))
        assert cfg.step_cfg.tau == 2e-3 and cfg.step_cfg.tol_el == 1e-7


class TestEvolve:
    def test_reference_run_invariants(self, reference_run, base_spec):
        E = [reference_run.E0] + [r["E"] for r in reference_run.rows]
        assert all(b <= a + 1e-10 for a, b in zip(E, E[1:]))
        for row, rep in zip(reference_run.rows, reference_run.reports):
            assert abs(row["mean"]) <= 1e-12
            assert abs(row["F"] - 0.5) <= 1e-10 * 0.5
            assert rep.converged and rep.decrease_ok and not rep.substituted
        assert [r["step"] for r in reference_run.rows] == list(range(1, 101))
        assert reference_run.rows[-1]["t"] == pytest.approx(0.1)
        assert set(DIAGNOSTIC_COLUMNS) <= set(reference_run.rows[0])

    def test_snapshot_thinning(self, unit_line, base_spec, cos1_start):
        cfg = RunConfig(base_spec, P, unit_line, tau=1e-3, t_end=0.0105, snapshot_every=4)
        traj = evolve(cos1_start, cfg)
        assert traj.times == pytest.approx([0.0, 0.004, 0.008, 0.011])
        assert len(traj.rows) == 11

    def test_deterministic(self, short_cfg, cos1_start):
        a = evolve(cos1_start, short_cfg)
        b = evolve(cos1_start, short_cfg)
        assert a.rows == b.rows

    def test_infeasible_start(self, short_cfg, cos1_start):
        with pytest.raises(InfeasibleInitial):
            evolve(cos1_start * 1.01, short_cfg)
        with pytest.raises(InfeasibleInitial):
            evolve(cos1_start + 1e-9, short_cfg)

    def test_initial_margin_below_floor(self, short_cfg, cos1_start):
        with pytest.raises(MarginCollapse) as info:
            evolve(cos1_start, replace(short_cfg, margin_floor=10.0))
        traj = info.value.trajectory
        assert traj.status == "margin_collapse" and len(traj.states) == 1 and not traj.rows

    def test_margin_collapse_mid_run(self, reference_run, unit_line, base_spec, cos1_start):
        margins = [r["margin"] for r in reference_run.rows]
        floor = 0.5 * (margins[4] + margins[5])
        assert margins[5] < floor < margins[4]
        cfg = RunConfig(base_spec, P, unit_line, tau=1e-3, t_end=0.1, margin_floor=floor,
                        snapshot_every=50)
        with pytest.raises(MarginCollapse) as info:
            evolve(cos1_start, cfg)
        traj = info.value.trajectory
        assert len(traj.rows) == 6
        assert traj.states[-1].margin < floor

    def test_critical_start_is_stationary(self, unit_line, base_spec, reference_run):
        cfg = RunConfig(base_spec, P, unit_line, tau=1e-2, t_end=0.1)
        v = reference_run.final.v
        for _ in range(10):  # settle onto the discrete critical point first
            v = evolve(v, cfg).final.v
        traj = evolve(v, cfg)
        assert all(rep.inner_iters == 0 for rep in traj.reports)
        assert np.array_equal(traj.final.v, v)
        assert all(np.isfinite(rep.B) for rep in traj.reports)

    def test_half_step_retry(self, short_cfg, cos1_start, monkeypatch):
        real = flow.proximal_step
        calls = []

        def flaky(grid, state, spec, cfg, p, plan=None):
            calls.append(cfg.tau)
            if len(calls) == 1:
                raise NoConvergence("forced")
            return real(grid, state, spec, cfg, p, plan)

        monkeypatch.setattr(flow, "proximal_step", flaky)
        traj = evolve(cos1_start, replace(short_cfg, t_end=2e-3))
        assert calls[:3] == [1e-3, 5e-4, 5e-4]
        assert traj.reports[0].substituted and not traj.reports[1].substituted
        assert traj.rows[0]["t"] == 1e-3

    def test_persistent_failure_is_wrapped(self, short_cfg, cos1_start, monkeypatch):
        def broken(*args, **kwargs):
            raise LineSearchStall("forced")

        monkeypatch.setattr(flow, "proximal_step", broken)
        with pytest.raises(StepFailure) as info:
            evolve(cos1_start, short_cfg)
        assert info.value.step == 1 and isinstance(info.value.cause, LineSearchStall)

    def test_two_dimensional(self):
        from wpflow import Grid, construct_feasible
        g = Grid.box(1.0, 1.0, 24, 24)
        spec = ConstraintSpec(0.1, 0.7)
        v0 = construct_feasible(spec, g.cosine_mode((2, 1)), P, g)
        traj = evolve(v0, RunConfig(spec, P, g, tau=5e-3, t_end=0.05, snapshot_every=5))
        assert all(c.passed for c in check_estimates(traj))


class TestEstimates:
    def test_reference_run_passes(self, reference_run):
        checks = check_estimates(reference_run)
        assert [c.name for c in checks] == [
            "energy_distance_step", "energy_monotone", "increment_sum", "hoelder_pairs",
            "uniform_h2_bound", "multiplier_integral"]
        assert all(c.passed for c in checks), [c.line() for c in checks]

    def test_single_state(self, unit_line, base_spec, cos1_start):
        traj = evolve(cos1_start, RunConfig(base_spec, P, unit_line, tau=1e-3, t_end=0.0))
        assert len(traj.states) == 1
        assert all(c.passed for c in check_estimates(traj))

    def test_tampered_energy_detected(self, reference_run):
        bad = {c.name: c for c in check_estimates(tamper(reference_run, step=40))}
        assert not bad["energy_monotone"].passed
        assert bad["energy_monotone"].worst > 0
        # the original is untouched
        assert all(c.passed for c in check_estimates(reference_run))

    def test_summary(self, reference_run):
        s = reference_run.summary()
        assert s["steps"] == 100 and s["status"] == "ok"
        assert s["observed_m_M"] > 0 and s["min_margin"] > 1e-4
        assert s["max_abs_B"] >= abs(reference_run.reports[0].B)
        assert math.isfinite(s["d35_accumulator"]) and s["kappa_fit"] > 0


class TestDependence:
    def test_zero_perturbation(self, short_cfg, cos1_start):
        rep = continuous_dependence_harness(cos1_start, np.zeros_like(cos1_start), short_cfg)
        assert rep.coincident and rep.initial_gap_sq == 0.0

    def test_small_perturbation(self, short_cfg, cos1_start, unit_line):
        delta = 1e-6 * unit_line.cosine_mode((2,))
        rep = continuous_dependence_harness(cos1_start, delta, short_cfg)
        assert not rep.coincident and rep.finite and rep.bounded
        assert rep.ratios[0] == pytest.approx(1.0)
        assert len(rep.ratios) == 11
