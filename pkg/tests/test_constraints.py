import numpy as np
import pytest

from wpflow.checks import smooth_random_field
from wpflow.constraints import (
    ConstraintSpec,
    beta_alpha_estimate,
    construct_feasible,
    feasibility_report,
    m_M_probe,
    minimize_area,
    retract_to_manifold,
    z_empty_sufficient,
)
from wpflow.errors import (
    DegenerateDirection,
    InfeasibleBeta,
    TrustRegionViolation,
    ZeroDirection,
)
from wpflow.functionals import PotentialParams, area_F, make_state
from wpflow.grid import Grid
from wpflow.neumann import NeumannPlan

P = PotentialParams(1.0)


class TestSpec:
    @pytest.mark.parametrize("kwargs", [dict(alpha=0.0, beta=0.0), dict(alpha=np.inf, beta=1.0),
                                        dict(alpha=0.0, beta=1.0, tol_area=0.0)])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            ConstraintSpec(**kwargs)


class TestMinimalArea:
    def test_zero_mean(self, unit_line):
        assert abs(beta_alpha_estimate(0.0, P, unit_line) - 0.25) <= 1e-6

    @pytest.mark.parametrize("alpha", [1.0, -1.0])
    def test_at_wells(self, unit_line, alpha):
        assert beta_alpha_estimate(alpha, P, unit_line) <= 1e-10

    def test_intermediate_mean(self, unit_line):
        # constant alpha = 0.5 beats every phase-separated seed on [0, 1]
        assert beta_alpha_estimate(0.5, P, unit_line) == pytest.approx(0.140625, abs=1e-9)

    def test_minimizer_and_seeds(self):
        g = Grid.box(1.0, 1.0, 16, 16)
        F, w, seeds = minimize_area(0.0, P, g)
        assert abs(g.mean(w)) <= 1e-12
        assert F == pytest.approx(area_F(g, w, P), rel=1e-12)
        assert len(seeds) == 6 and all(ok for _, _, ok, _ in seeds)

    def test_long_domain_separates(self):
        # on a long interval one interface is cheaper than the uniform state
        g = Grid.line(8.0, 128)
        F, w, _ = minimize_area(0.0, P, g)
        assert F < 0.25 * 8.0
        assert np.ptp(w) > 1.5


class TestConstructFeasible:
    def test_cosine_direction(self, unit_line, base_spec):
        w, lam = construct_feasible(base_spec, unit_line.cosine_mode((1,)), P, unit_line,
                                    full_output=True)
        # continuum root of 3 l^4/32 + l^2 (pi^2 - 1)/4 = 1/4
        coeffs = [3 / 32, 0, (np.pi**2 - 1) / 4, 0, -0.25]
        root = max(r.real for r in np.roots(coeffs) if abs(r.imag) < 1e-12)
        assert abs(lam - root) <= 5e-3
        assert abs(unit_line.mean(w)) <= 1e-12
        assert abs(area_F(unit_line, w, P) - 0.5) <= 1e-10 * 0.5

    def test_beta_at_minimum_rejected(self, unit_line):
        with pytest.raises(InfeasibleBeta):
            ConstraintSpec(1.0, 0.0)
        with pytest.raises(InfeasibleBeta):
            construct_feasible(ConstraintSpec(0.0, 0.2), unit_line.cosine_mode((1,)), P,
                               unit_line)

    def test_bad_directions(self, unit_line, base_spec):
        with pytest.raises(ZeroDirection):
            construct_feasible(base_spec, np.zeros(128), P, unit_line)
        with pytest.raises(ZeroDirection):
            construct_feasible(base_spec, np.ones(128), P, unit_line)

    @pytest.mark.parametrize("alpha,beta", [(0.3, 0.6), (-0.5, 0.4), (0.0, 2.0)])
    def test_postconditions(self, alpha, beta):
        g = Grid.box(1.0, 1.0, 24, 24)
        spec = ConstraintSpec(alpha, beta)
        w = construct_feasible(spec, g.cosine_mode((2, 1)), P, g)
        assert abs(g.mean(w) - alpha) <= spec.tol_mean
        assert abs(area_F(g, w, P) - beta) <= spec.tol_area * beta


class TestRetraction:
    def test_fixed_point(self, unit_line, base_spec, cos1_start):
        w, steps = retract_to_manifold(cos1_start, base_spec, P, unit_line, full_output=True)
        assert steps == 0 and w is cos1_start

    def test_smooth_perturbation(self, unit_line, base_spec, cos1_start):
        rng = np.random.default_rng(5)
        for _ in range(10):
            noise = smooth_random_field(unit_line, rng)
            noise -= unit_line.mean(noise)
            w, steps = retract_to_manifold(cos1_start + 1e-3 * noise, base_spec, P, unit_line,
                                           full_output=True)
            assert steps <= 5
            assert abs(area_F(unit_line, w, P) - 0.5) <= 1e-10 * 0.5
            assert abs(unit_line.mean(w)) <= 1e-12

    def test_mean_shift_only(self, unit_line, base_spec, cos1_start):
        w = retract_to_manifold(cos1_start + 1e-4, base_spec, P, unit_line)
        assert abs(unit_line.mean(w)) <= 1e-12
        assert abs(area_F(unit_line, w, P) - 0.5) <= 1e-10 * 0.5

    def test_constant_is_degenerate(self, unit_line):
        with pytest.raises(DegenerateDirection):
            retract_to_manifold(unit_line.constant(0.0), ConstraintSpec(0.0, 0.3), P, unit_line)

    def test_far_point_rejected(self, unit_line, base_spec, cos1_start):
        with pytest.raises(TrustRegionViolation):
            retract_to_manifold(cos1_start + 0.5, base_spec, P, unit_line)
        with pytest.raises(TrustRegionViolation):
            retract_to_manifold(3.0 * cos1_start, base_spec, P, unit_line)


class TestDegeneracy:
    @pytest.mark.parametrize("alpha,beta,expect", [
        (0.0, 0.3, True), (0.0, 0.2, False),
        (1.0, 11 / 64 + 1e-9, True), (1.0, 11 / 64 - 1e-9, False), (1.0, 11 / 64, False),
    ])
    def test_truth_table(self, unit_line, alpha, beta, expect):
        assert z_empty_sufficient(ConstraintSpec(alpha, beta), P, unit_line) is expect

    def test_scales_with_domain_and_coefficient(self):
        g = Grid.line(2.0, 16)
        # 2 beta + (a |Omega| / 2)(-1) with a = 3, |Omega| = 2 vanishes at beta = 1.5
        assert z_empty_sufficient(ConstraintSpec(0.0, 1.51), PotentialParams(3.0), g)
        assert not z_empty_sufficient(ConstraintSpec(0.0, 1.49), PotentialParams(3.0), g)

    def test_probe(self, unit_line, cos1_start):
        plan = NeumannPlan(unit_line)
        flat = make_state(unit_line, unit_line.constant(0.5), P)
        assert m_M_probe([flat], plan) <= 1e-30
        s1 = make_state(unit_line, cos1_start, P)
        s2 = make_state(unit_line, 0.5 * cos1_start, P)
        assert m_M_probe([s1], plan) > 0
        assert m_M_probe([s1, s2], plan) <= min(m_M_probe([s1], plan), m_M_probe([s2], plan))

    def test_report(self, unit_line, base_spec, cos1_start):
        rep = feasibility_report(base_spec, P, unit_line,
                                 states=[make_state(unit_line, cos1_start, P)])
        lines = list(rep.lines())
        assert lines[0] == "beta_alpha_est = 0.25"
        assert lines[1] == "z_empty_sufficient = true"
        assert rep.margin_lower_bound_est > 0
