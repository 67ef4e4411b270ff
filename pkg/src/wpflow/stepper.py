"""One minimizing-movement step.

Minimises ``||w - f||^2 / 2 + tau E[w]`` over the constraint set by projected
descent: search directions are made orthogonal to the two constraint
gradients ``1`` and ``mu``, trial points are retracted back onto the set
before they are compared, and the Lagrange multipliers are the coefficients
of the projection onto ``span{1, mu}``.

Search directions are preconditioned with the cosine-diagonal operator
``I + tau (c - lap)^2`` (``c`` the mean of ``W''(f)``), which matches the
leading part of the Hessian so that unit steps are nearly Newton steps. The
acceptance test, the stopping rule and all reported residuals use the plain
L2 geometry.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .constraints import DEGENERACY_THRESHOLD, ConstraintSpec, retract_to_manifold
from .errors import (
    DegenerateDirection,
    LineSearchStall,
    NoConvergence,
    TrustRegionViolation,
)
from .functionals import (
    W2,
    PhaseState,
    PotentialParams,
    energy_and_grad,
    make_state,
    mu_difference,
)
from .grid import Grid
from .neumann import NeumannPlan

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepConfig:
    tau: float
    tol_el: float = 1e-8
    max_inner: int = 5000
    shrink: float = 0.5
    armijo: float = 1e-4
    initial_step: float = 1.0
    min_step: float = 1e-16
    precondition: bool = True

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        if self.tol_el <= 0 or self.max_inner < 1:
            raise ValueError("tol_el must be positive and max_inner at least 1")
        if not 0.0 < self.shrink < 1.0 or not 0.0 < self.armijo < 1.0:
            raise ValueError("line-search parameters must lie in (0, 1)")


@dataclass
class StepReport:
    A: float
    B: float
    el_residual: float
    mean_residual: float
    area_residual: float
    inner_iters: int
    objective: float
    decrease_ok: bool
    a1_residual: float
    a2_residual: float
    step_sq: float
    converged: bool = True
    substituted: bool = False


def tangential_gradient(grid: Grid, u: np.ndarray, f: np.ndarray, tau: float,
                        p: PotentialParams, *, _cache=None):
    """Split ``g = (u - f)/tau + grad E(u)`` as ``A + B mu + r`` with ``r`` orthogonal
    to constants and to ``mu``.

    Returns ``(r, A, B)``.
    """
    if _cache is None:
        _, mu, gE = energy_and_grad(grid, u, p)
    else:
        _, mu, gE = _cache
    g = (u - f) / tau + gE
    mu_bar = grid.mean(mu)
    centred = mu - mu_bar
    m_sq = grid.inner(centred, centred)
    if np.sqrt(m_sq) < DEGENERACY_THRESHOLD:
        raise DegenerateDirection(f"margin {np.sqrt(m_sq):.3e} below threshold")
    B = grid.inner(g, centred) / m_sq
    A = grid.mean(g) - B * mu_bar
    r = g - A - B * mu
    return r, A, B


def verify_multiplier_identities(grid: Grid, v: np.ndarray, f: np.ndarray, A: float, B: float,
                                 p: PotentialParams, mu: np.ndarray | None = None):
    """Scaled residuals of the two multiplier identities at ``v``.

    ``A + B mean(mu) = mean(W''(v) mu)`` and
    ``B ||mu - mean mu||^2 = ||grad mu||^2 + int W''(v) mu^2 - mean(W''(v) mu) int mu``.
    Each residual is ``|lhs - rhs| / (1 + max(|lhs|, |rhs|))``.
    """
    if mu is None:
        _, mu, _ = energy_and_grad(grid, v, p)
    w2mu = W2(v, p) * mu
    mu_bar = grid.mean(mu)
    lhs1 = A + B * mu_bar
    rhs1 = grid.mean(w2mu)
    centred = mu - mu_bar
    lhs2 = B * grid.inner(centred, centred)
    rhs2 = (2.0 * grid.dirichlet_energy(mu) + grid.inner(w2mu, mu)
            - rhs1 * grid.integrate(mu))
    res1 = abs(lhs1 - rhs1) / (1.0 + max(abs(lhs1), abs(rhs1)))
    res2 = abs(lhs2 - rhs2) / (1.0 + max(abs(lhs2), abs(rhs2)))
    return res1, res2


class _Preconditioner:
    def __init__(self, plan: NeumannPlan, tau: float, shift: float):
        self.plan = plan
        self.symbol = 1.0 / (1.0 + tau * (plan.eigenvalues + shift) ** 2)

    def __call__(self, w):
        return self.plan.apply_symbol(w, self.symbol)


def _project(grid, z, e, q, mu):
    """Remove from ``z`` the combination of ``e`` and ``q`` that leaves it
    L2-orthogonal to constants and to ``mu``."""
    one = grid.constant(1.0)
    G = np.array([[grid.inner(e, one), grid.inner(q, one)],
                  [grid.inner(e, mu), grid.inner(q, mu)]])
    rhs = np.array([grid.inner(z, one), grid.inner(z, mu)])
    coef = np.linalg.solve(G, rhs)
    return z - coef[0] * e - coef[1] * q


def proximal_step(grid: Grid, f_state: PhaseState, spec: ConstraintSpec, cfg: StepConfig,
                  p: PotentialParams, plan: NeumannPlan | None = None):
    """Advance one step from ``f_state``.

    Returns ``(state, report)``. On :class:`NoConvergence` the partial state
    and report are attached to the exception as ``.state`` and ``.report``.
    """
    plan = plan or NeumannPlan(grid)
    tau = cfg.tau
    # trial points are compared at rounding level, so retract that tightly
    tight = replace(spec, tol_mean=min(spec.tol_mean, 1e-15), tol_area=min(spec.tol_area, 1e-15))
    f = f_state.v
    E_f = f_state.energy_E
    shift = float(grid.mean(W2(f, p)))
    precond = _Preconditioner(plan, tau, shift) if cfg.precondition else None

    u = f
    E_u, mu_u, gE_u = energy_and_grad(grid, u, p)
    dist_sq = 0.0  # ||u - f||^2
    step = cfg.initial_step
    its = 0
    converged = False
    while True:
        r, A, B = tangential_gradient(grid, u, f, tau, p, _cache=(E_u, mu_u, gE_u))
        g_norm = grid.norm((u - f) / tau + gE_u)
        el = grid.norm(r) / (1.0 + g_norm)
        if el <= cfg.tol_el:
            converged = True
            break
        if its >= cfg.max_inner:
            break
        its += 1
        # descent direction in the tangent space, scaled so unit steps are natural
        if precond is not None:
            z = precond(tau * r)
            e = precond(grid.constant(1.0))
            q = precond(mu_u)
            d = _project(grid, z, e, q, mu_u)
        else:
            d = tau * r
        slope = tau * grid.inner(r, d)  # directional derivative of the objective
        if slope <= 0.0:
            d = tau * r
            slope = tau * grid.inner(r, d)
        while True:
            try:
                trial = retract_to_manifold(u - step * d, tight, p, grid)
            except (TrustRegionViolation, NoConvergence, DegenerateDirection):
                trial = None
            if trial is not None:
                dmu = mu_difference(grid, trial, u, p)
                E_t, mu_t, gE_t = energy_and_grad(grid, trial, p)
                # objective difference without cancellation
                du = trial - u
                delta = 0.5 * grid.inner(du, trial + u - 2.0 * f) + 0.5 * tau * grid.inner(
                    dmu, mu_t + mu_u)
                if delta < 0.0 and delta <= -cfg.armijo * step * slope:
                    break
            step *= cfg.shrink
            if step < cfg.min_step:
                raise LineSearchStall(
                    f"no acceptable step after {its} iterations (EL residual {el:.3e})")
        u, E_u, mu_u, gE_u = trial, E_t, mu_t, gE_t
        step = min(cfg.initial_step, step / cfg.shrink)

    v_state = make_state(grid, u, p)
    dist_sq = grid.inner(u - f, u - f)
    objective = 0.5 * dist_sq + tau * v_state.energy_E
    decrease_ok = dist_sq / (2.0 * tau) + v_state.energy_E <= E_f + 1e-10 * (1.0 + E_f)
    a1, a2 = verify_multiplier_identities(grid, u, f, A, B, p, mu=v_state.mu)
    report = StepReport(
        A=A, B=B, el_residual=el,
        mean_residual=abs(v_state.mean_v - spec.alpha),
        area_residual=abs(v_state.area_F - spec.beta) / spec.beta,
        inner_iters=its, objective=objective, decrease_ok=bool(decrease_ok),
        a1_residual=a1, a2_residual=a2, step_sq=dist_sq, converged=converged,
    )
    if not converged:
        exc = NoConvergence(f"EL residual {el:.3e} after {its} inner iterations")
        exc.state, exc.report = v_state, report
        raise exc
    return v_state, report
