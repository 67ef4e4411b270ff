"""The constraint set {mean(w) = alpha, F[w] = beta} and related tools.

Includes the minimal-area estimate, feasible-point construction by scaling a
mean-zero direction, the Newton retraction used after descent steps, the
closed-form sufficient test for absence of constrained critical points, and
the empirical dual-norm margin probe.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateDirection,
    InfeasibleBeta,
    NoConvergence,
    TrustRegionViolation,
    ZeroDirection,
)
from .functionals import (
    PotentialParams,
    W,
    area_difference,
    area_F,
    chemical_potential,
)
from .grid import Grid
from .neumann import NeumannPlan

log = logging.getLogger(__name__)

DEGENERACY_THRESHOLD = 1e-10
# area residual treated as exact zero by the retraction
ROUNDOFF_FLOOR = 64 * np.finfo(float).eps


@dataclass(frozen=True)
class ConstraintSpec:
    alpha: float
    beta: float
    tol_mean: float = 1e-12
    tol_area: float = 1e-10

    def __post_init__(self):
        if not np.isfinite(self.alpha):
            raise ValueError("alpha must be finite")
        if not np.isfinite(self.beta):
            raise ValueError("beta must be finite")
        if self.beta <= 0:
            # F >= 0 everywhere, so no field can sit strictly above a non-positive level
            raise InfeasibleBeta(f"beta must be positive, got {self.beta}")
        if self.tol_mean <= 0 or self.tol_area <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class FeasibilityReport:
    beta_alpha_est: float
    z_empty_sufficient: bool
    margin_lower_bound_est: float = float("nan")
    seeds: list = field(default_factory=list)

    def lines(self):
        yield f"beta_alpha_est = {self.beta_alpha_est:.17g}"
        yield f"z_empty_sufficient = {str(self.z_empty_sufficient).lower()}"
        yield f"observed_m_M = {self.margin_lower_bound_est:.17g}"


# -- minimal area -------------------------------------------------------------

def _area_seeds(alpha, grid):
    x = grid.coords()[0]
    Lx = grid.extents[0]
    split = np.sign(x - 0.5 * Lx)
    split -= grid.mean(split)
    seeds = [
        ("constant", grid.constant(alpha)),
        ("cos1-small", alpha + 0.05 * grid.cosine_mode((1,) + (0,) * (grid.dim - 1))),
        ("cos1-large", alpha + 0.4 * grid.cosine_mode((1,) + (0,) * (grid.dim - 1))),
        ("cos2", alpha + 0.2 * grid.cosine_mode((2,) + (0,) * (grid.dim - 1))),
        ("sign-split", alpha + 0.8 * split),
    ]
    if grid.dim == 2:
        seeds.append(("cos11", alpha + 0.2 * grid.cosine_mode((1, 1))))
    return seeds


def _descend_area(w, grid, p, plan, gtol, max_iter):
    """Mean-preserving descent on F with an H1-type preconditioner.

    Returns ``(w, F, converged, iterations)``.
    """
    shift = 2.0 * p.a  # keeps the preconditioner (shift - lap) comfortably SPD
    symbol = 1.0 / (shift + plan.eigenvalues)
    F = area_F(grid, w, p)
    step = 1.0
    for it in range(max_iter + 1):
        mu = chemical_potential(grid, w, p)
        g = mu - grid.mean(mu)
        if grid.norm(g) <= gtol:
            return w, F, True, it
        d = plan.apply_symbol(g, symbol)
        d -= grid.mean(d)
        slope = grid.inner(g, d)
        while True:
            trial = w - step * d
            dF = area_difference(grid, trial, w, p)
            if dF <= -1e-4 * step * slope and dF < 0:
                break
            step *= 0.5
            if step < 1e-16:
                return w, F, False, it
        w = trial
        F += dF
        step = min(1.0, 2.0 * step)
    return w, F, False, max_iter


def minimize_area(alpha: float, p: PotentialParams, grid: Grid, *, gtol: float = 1e-8,
                  max_iter: int = 5000):
    """Multi-seed estimate of the minimal area at fixed mean ``alpha``.

    Returns
    -------
    F_min : float
        Smallest converged value of F (an upper bound for the true minimum).
    w_min : ndarray
        The corresponding field.
    seeds : list of tuple
        ``(name, F, converged, iterations)`` per seed.
    """
    plan = NeumannPlan(grid)
    best = None
    seeds = []
    for name, w0 in _area_seeds(alpha, grid):
        w, F, ok, its = _descend_area(w0, grid, p, plan, gtol, max_iter)
        F = area_F(grid, w, p)
        seeds.append((name, F, ok, its))
        log.debug("area seed %s: F=%.12g converged=%s iterations=%d", name, F, ok, its)
        if ok and (best is None or F < best[0]):
            best = (F, w)
    if best is None:
        raise NoConvergence(f"no area-descent seed converged for alpha={alpha}")
    return best[0], best[1], seeds


def beta_alpha_estimate(alpha: float, p: PotentialParams, grid: Grid) -> float:
    return minimize_area(alpha, p, grid)[0]


# -- feasible points ----------------------------------------------------------

def construct_feasible(spec: ConstraintSpec, phi: np.ndarray, p: PotentialParams, grid: Grid,
                       *, w_alpha: np.ndarray | None = None, beta_alpha: float | None = None,
                       full_output: bool = False):
    """Return ``w_alpha + lam * phi`` with ``F = beta`` and mean ``alpha``.

    ``lam`` is found by bisection after doubling an upper bracket from 1.
    Pass ``w_alpha`` and ``beta_alpha`` to reuse an earlier area minimisation.
    With ``full_output`` the pair ``(w, lam)`` is returned.
    """
    phi = np.asarray(phi, dtype=np.float64)
    phi_norm = grid.norm(phi)
    if phi_norm == 0.0:
        raise ZeroDirection("direction phi is identically zero")
    if abs(grid.mean(phi)) > 1e-12 * max(1.0, phi_norm):
        raise ZeroDirection(f"direction phi has mean {grid.mean(phi):.3e}, expected 0")
    phi = phi - grid.mean(phi)
    if w_alpha is None or beta_alpha is None:
        beta_alpha, w_alpha, _ = minimize_area(spec.alpha, p, grid)
    if spec.beta <= beta_alpha:
        raise InfeasibleBeta(
            f"beta={spec.beta} does not exceed the estimated minimal area {beta_alpha:.12g}"
        )
    w_alpha = w_alpha + (spec.alpha - grid.mean(w_alpha))

    def excess(lam):
        return area_F(grid, w_alpha + lam * phi, p) - spec.beta

    lo, hi = 0.0, 1.0
    while excess(hi) <= 0.0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e12:
            raise NoConvergence("could not bracket the area level along phi")
    target = spec.tol_area * spec.beta
    lam = hi
    for _ in range(200):
        lam = 0.5 * (lo + hi)
        e = excess(lam)
        if abs(e) <= target:
            break
        if e < 0.0:
            lo = lam
        else:
            hi = lam
    else:
        raise NoConvergence("bisection on the area level did not converge")
    w = w_alpha + lam * phi
    return (w, lam) if full_output else w


# -- retraction ---------------------------------------------------------------

def retract_to_manifold(w: np.ndarray, spec: ConstraintSpec, p: PotentialParams, grid: Grid,
                        *, max_newton: int = 30, full_output: bool = False):
    """Map a nearby field back onto the constraint set.

    The mean is fixed by a constant shift; the area is fixed by a scalar
    Newton iteration along ``d = mu - mean(mu)``, whose F-derivative at the
    start is ``||d||^2``. With ``full_output`` returns ``(w, newton_steps)``.

    Raises
    ------
    TrustRegionViolation
        ``w`` is too far from the constraint set.
    DegenerateDirection
        ``mu`` is numerically constant, so the area cannot be corrected.
    """
    mean_err = grid.mean(w) - spec.alpha
    F = area_F(grid, w, p)
    if abs(mean_err) > 0.1 * (1.0 + abs(spec.alpha)) or abs(F - spec.beta) > 0.5 * spec.beta:
        raise TrustRegionViolation(
            f"mean error {mean_err:.3e}, area error {F - spec.beta:.3e} outside trust region"
        )
    target = spec.tol_area * spec.beta
    if abs(mean_err) <= spec.tol_mean and abs(F - spec.beta) <= target:
        return (w, 0) if full_output else w

    base = w - mean_err
    mu = chemical_potential(grid, base, p)
    d = mu - grid.mean(mu)
    d_sq = grid.inner(d, d)
    if np.sqrt(d_sq) < DEGENERACY_THRESHOLD:
        raise DegenerateDirection(f"margin {np.sqrt(d_sq):.3e} below threshold")

    def excess(s):
        return area_F(grid, base + s * d, p) - spec.beta

    s = 0.0
    phi = area_F(grid, base, p) - spec.beta
    steps = 0
    floor = ROUNDOFF_FLOOR * max(spec.beta, 1.0)
    while abs(phi) > target:
        if steps >= max_newton:
            return _bisect_retraction(base, d, excess, target, spec, grid, full_output, steps)
        slope = grid.inner(chemical_potential(grid, base + s * d, p), d)
        if slope <= 0.0:
            return _bisect_retraction(base, d, excess, target, spec, grid, full_output, steps)
        s_new = s - phi / slope
        phi_new = excess(s_new)
        steps += 1
        if abs(phi_new) >= abs(phi):
            if abs(phi) <= floor:  # rounding level reached
                break
            return _bisect_retraction(base, d, excess, target, spec, grid, full_output, steps)
        s, phi = s_new, phi_new
    out = base + s * d
    out -= grid.mean(out) - spec.alpha
    return (out, steps) if full_output else out


def _bisect_retraction(base, d, excess, target, spec, grid, full_output, steps):
    e0 = excess(0.0)
    direction = -np.sign(e0)
    lo, hi = 0.0, direction * 1e-3
    while np.sign(excess(hi)) == np.sign(e0):
        lo, hi = hi, 2.0 * hi
        if abs(hi) > 1e6:
            raise NoConvergence("retraction could not bracket the area level")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        e = excess(mid)
        steps += 1
        if abs(e) <= max(target, ROUNDOFF_FLOOR * max(spec.beta, 1.0)):
            out = base + mid * d
            out -= grid.mean(out) - spec.alpha
            return (out, steps) if full_output else out
        if np.sign(e) == np.sign(e0):
            lo = mid
        else:
            hi = mid
    raise NoConvergence("retraction bisection did not reach the area tolerance")


# -- degeneracy ---------------------------------------------------------------

def z_empty_sufficient(spec: ConstraintSpec, p: PotentialParams, grid: Grid) -> bool:
    """Closed-form sufficient test that no feasible w has constant chemical potential.

    Any such w would satisfy
    ``2 beta + (a |Omega| / 2)(2 alpha^2 - 1 - 27 alpha^4 / 16) <= 0``,
    so a positive left-hand side rules them out. ``False`` is inconclusive.
    """
    a2 = spec.alpha**2
    value = 2.0 * spec.beta + 0.5 * p.a * grid.measure * (2.0 * a2 - 1.0 - 27.0 * a2 * a2 / 16.0)
    return bool(value > 0.0)


def m_M_probe(states, plan: NeumannPlan) -> float:
    """Smallest ``||grad N(mu - mean mu)||^2`` over the given states."""
    g = plan.grid
    best = float("inf")
    for st in states:
        centred = st.mu - g.mean(st.mu)
        best = min(best, plan.dual_norm_sq(centred))
    return best


def feasibility_report(spec: ConstraintSpec, p: PotentialParams, grid: Grid, states=()):
    beta_alpha, _, seeds = minimize_area(spec.alpha, p, grid)
    report = FeasibilityReport(
        beta_alpha_est=beta_alpha,
        z_empty_sufficient=z_empty_sufficient(spec, p, grid),
        seeds=seeds,
    )
    if states:
        report.margin_lower_bound_est = m_M_probe(states, NeumannPlan(grid))
    return report
