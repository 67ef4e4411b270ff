"""Independent oracles shared by the ``check`` command and the test-suite.

Finite-difference derivative checks, Neumann-solver checks and a
brute-force reference for a single proximal step on a tiny grid.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .constraints import ConstraintSpec, retract_to_manifold
from .functionals import (
    PotentialParams,
    area_F,
    chemical_potential,
    energy_and_grad,
    energy_E,
    grad_E,
)
from .grid import Grid
from .neumann import NeumannPlan


def smooth_random_field(grid: Grid, rng: np.random.Generator, kmax: int = 4) -> np.ndarray:
    """Random combination of the lowest cosine modes, scaled to sup-norm 1.

    Mode ``k`` gets a normal coefficient damped by ``(1 + |k|_1)^-2``.
    """
    out = np.zeros(grid.shape)
    for ks in itertools.product(range(kmax), repeat=grid.dim):
        out += rng.normal() / (1.0 + sum(ks)) ** 2 * grid.cosine_mode(ks)
    return out / np.abs(out).max()


@dataclass
class GradientCheck:
    functional: str
    rel_error: float
    richardson: float

    def ok(self, rel_tol=1e-6, band=(50.0, 200.0)) -> bool:
        return self.rel_error <= rel_tol and band[0] <= self.richardson <= band[1]


def directional_check(grid: Grid, w: np.ndarray, d: np.ndarray, p: PotentialParams,
                      coarse: float = 1e-4, fine: float = 1e-5) -> list[GradientCheck]:
    """Central differences of F and E along ``d`` against ``<mu, d>`` and ``<grad E, d>``.

    ``richardson`` is the ratio of the coarse-step to the fine-step error,
    which is 100 for a second-order difference of an exact gradient.
    """
    out = []
    pairs = (
        ("F", lambda x: area_F(grid, x, p), chemical_potential(grid, w, p)),
        ("E", lambda x: energy_E(grid, x, p), grad_E(grid, w, p)),
    )
    for name, fn, grad in pairs:
        exact = grid.inner(grad, d)

        def central(eps):
            return (fn(w + eps * d) - fn(w - eps * d)) / (2.0 * eps)

        err_c = abs(central(coarse) - exact)
        err_f = abs(central(fine) - exact)
        scale = max(abs(exact), 1e-300)
        ratio = err_c / err_f if err_f > 0 else np.inf
        out.append(GradientCheck(name, err_f / scale, ratio))
    return out


def gradient_checks(grid: Grid, p: PotentialParams, rng: np.random.Generator, n_fields: int = 20,
                    amplitude: float = 8.0) -> list[GradientCheck]:
    """Directional checks on ``n_fields`` smooth random (w, d) pairs."""
    results = []
    for _ in range(n_fields):
        w = smooth_random_field(grid, rng)
        d = amplitude * smooth_random_field(grid, rng)
        results.extend(directional_check(grid, w, d, p))
    return results


@dataclass
class SolverCheck:
    eigen_error: float
    adjoint_error: float
    inverse_error: float


def solver_checks(grid: Grid, rng: np.random.Generator, n_fields: int = 50,
                  plan: NeumannPlan | None = None) -> SolverCheck:
    """Eigenfunction inversion, symmetry of N and ``-lap N = I`` on mean-zero fields.

    All errors are relative.
    """
    plan = plan or NeumannPlan(grid)
    eig = 0.0
    ranges = [range(min(n, 6)) for n in grid.counts]
    for ks in itertools.product(*ranges):
        if not any(ks):
            continue
        phi = grid.cosine_mode(ks)
        u = plan.solve(phi)
        expect = phi / (-grid.eigenvalue(ks))
        eig = max(eig, grid.norm(u - expect) / grid.norm(expect))
    adj = inv = 0.0
    for _ in range(n_fields):
        a = rng.normal(size=grid.shape)
        b = rng.normal(size=grid.shape)
        a -= grid.mean(a)
        b -= grid.mean(b)
        Na, Nb = plan.solve(a), plan.solve(b)
        adj = max(adj, abs(grid.inner(Na, b) - grid.inner(a, Nb))
                  / (grid.norm(Na) * grid.norm(b)))
        inv = max(inv, grid.norm(-grid.laplacian(Na) - a) / grid.norm(a))
    return SolverCheck(eig, adj, inv)


def brute_force_step(grid: Grid, f: np.ndarray, spec: ConstraintSpec, tau: float,
                     p: PotentialParams, rng: np.random.Generator, restarts: int = 500,
                     feas_tol: float = 1e-9):
    """Smallest ``|w - f|^2/2 + tau E[w]`` found by SLSQP from random feasible starts.

    Only results satisfying both constraints to ``feas_tol`` count. Returns
    ``(best_objective, n_feasible)``; meant for grids of a few dozen nodes.
    """
    n = grid.size
    vol = grid.cell_volume

    def obj(w):
        w = w.reshape(grid.shape)
        return 0.5 * grid.inner(w - f, w - f) + tau * energy_E(grid, w, p)

    def jac(w):
        w = w.reshape(grid.shape)
        return (vol * ((w - f) + tau * energy_and_grad(grid, w, p)[2])).ravel()

    cons = [
        {"type": "eq", "fun": lambda w: grid.mean(w.reshape(grid.shape)) - spec.alpha,
         "jac": lambda w: np.full(n, 1.0 / n)},
        {"type": "eq", "fun": lambda w: area_F(grid, w.reshape(grid.shape), p) - spec.beta,
         "jac": lambda w: vol * chemical_potential(grid, w.reshape(grid.shape), p).ravel()},
    ]
    best, hits = np.inf, 0
    for _ in range(restarts):
        scale = 10.0 ** rng.uniform(-3.0, 0.0)
        x0 = f + scale * rng.normal(size=grid.shape)
        try:
            x0 = retract_to_manifold(x0, spec, p, grid)
        except Exception:  # an infeasible start is still a valid SLSQP start
            pass
        res = minimize(obj, x0.ravel(), jac=jac, constraints=cons, method="SLSQP",
                       options={"ftol": 1e-15, "maxiter": 1000})
        w = res.x.reshape(grid.shape)
        if (abs(grid.mean(w) - spec.alpha) < feas_tol
                and abs(area_F(grid, w, p) - spec.beta) < feas_tol):
            hits += 1
            best = min(best, float(res.fun))
    return best, hits
