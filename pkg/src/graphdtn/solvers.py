"""Dirichlet and Neumann problems for the graph p-Laplacian.

Both problems are convex minimizations solved by damped Newton with
epsilon continuation (see :mod:`graphdtn._newton`):

* Dirichlet: minimize ``p_energy(u)`` with ``u = f`` on the boundary.
* Neumann: minimize ``I(u) = p_energy(u)/p - sum_z ell_z u_z`` over all
  vertex functions, normalized to zero mu-mean over the interior.

A brute-force grid-and-coordinate-descent minimizer is provided as an
independent oracle for tiny instances.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import linalg, optimize

from . import _newton
from .besov import check_functional
from .config import SolverConfig
from .graph import MetricMeasureGraph
from .sobolev import extend_linear, mu_mean_zero, p_energy, p_laplacian

log = logging.getLogger(__name__)


@dataclass
class SolveResult:
    u: np.ndarray
    energy: float           # p_energy(u)
    objective: float        # p_energy/p for Dirichlet, I(u) for Neumann
    el_residual: float
    iterations: int
    converged: bool


class SolverError(RuntimeError):
    """Non-convergence; carries the best iterate found."""

    def __init__(self, message: str, result: SolveResult):
        super().__init__(message)
        self.result = result


def _problem(graph, p, b, free, pin=None):
    return _newton.EdgeEnergyProblem(graph.gradient_matrix, graph.edge_mu, p, b, free, pin)


def solve_dirichlet(f: np.ndarray, graph: MetricMeasureGraph, cfg: SolverConfig,
                    raise_on_failure: bool = True) -> SolveResult:
    """p-harmonic function with boundary values ``f``."""
    p = cfg.p
    f = np.asarray(f, dtype=float)
    u0 = extend_linear(f, graph)
    prob = _problem(graph, p, np.zeros(graph.n), graph.interior)
    u, info = _newton.minimize(prob, u0, cfg.eps_schedule, cfg.grad_tol, cfg.max_iter)
    u[graph.boundary] = f
    res = SolveResult(u, p_energy(u, graph, p), p_energy(u, graph, p) / p,
                      el_residual(u, graph, p, "dirichlet"), info.iterations, info.converged)
    if not info.converged and raise_on_failure:
        raise SolverError(f"Dirichlet solve did not converge (residual {info.residual:.3e})", res)
    return res


def neumann_load(ell: np.ndarray, graph: MetricMeasureGraph) -> np.ndarray:
    b = np.zeros(graph.n)
    b[graph.boundary] = ell
    return b


def neumann_objective(u: np.ndarray, ell: np.ndarray, graph: MetricMeasureGraph, p: float) -> float:
    return p_energy(u, graph, p) / p - float(np.asarray(ell) @ np.asarray(u)[graph.boundary])


def solve_neumann(ell: np.ndarray, graph: MetricMeasureGraph, cfg: SolverConfig,
                  renormalize: bool = False, raise_on_failure: bool = True) -> SolveResult:
    """Minimizer of ``I`` with zero mu-mean over the interior."""
    p = cfg.p
    ell = check_functional(ell, renormalize)
    b = neumann_load(ell, graph)
    u0 = _neumann_start(b, graph, p)
    prob = _problem(graph, p, b, np.arange(graph.n), pin=graph.mu)
    u, info = _newton.minimize(prob, u0, cfg.eps_schedule, cfg.grad_tol, cfg.max_iter)
    u = mu_mean_zero(u, graph)
    res = SolveResult(u, p_energy(u, graph, p), neumann_objective(u, ell, graph, p),
                      el_residual(u, graph, p, "neumann", ell), info.iterations, info.converged)
    if not info.converged and raise_on_failure:
        raise SolverError(f"Neumann solve did not converge (residual {info.residual:.3e})", res)
    return res


def _neumann_start(b, graph, p):
    if not np.any(b):
        return np.zeros(graph.n)
    L = graph.laplacian.toarray()
    q = graph.mu / np.linalg.norm(graph.mu)
    u2 = linalg.solve(L + np.mean(np.diag(L)) * np.outer(q, q), b, assume_a="pos")
    if p == 2.0:
        return u2
    # best multiple t of u2: t^(p-1) * p_energy(u2) = b . u2
    return (b @ u2 / p_energy(u2, graph, p)) ** (1.0 / (p - 1.0)) * u2


def el_residual(u: np.ndarray, graph: MetricMeasureGraph, p: float, mode: str = "dirichlet",
                ell: np.ndarray | None = None) -> float:
    """Max-abs Euler-Lagrange defect over indicator test functions.

    Dirichlet mode tests interior indicators (``max |Lap_p u|`` inside);
    Neumann mode tests every vertex against the load ``ell``.
    """
    lap = p_laplacian(u, graph, p)
    if mode == "dirichlet":
        return float(np.abs(lap[graph.interior]).max(initial=0.0))
    if mode == "neumann":
        if ell is None:
            raise ValueError("neumann mode needs the functional")
        return float(np.abs(lap - neumann_load(ell, graph)).max(initial=0.0))
    raise ValueError(f"unknown mode {mode!r}")


@dataclass
class EnergyBounds:
    skipped: bool
    objective: float = np.nan            # I(u_L)
    objective_lower: float = np.nan      # (1-p)/p (|L| |Tr|)^(p/(p-1))
    objective_ok: bool = True
    grad_norm: float = np.nan            # |grad u_L|_p
    grad_upper: float = np.nan           # (2p |L||Tr|)^(1/(p-1)) + 2|I|/(|L||Tr|)
    grad_ok: bool = True

    @property
    def holds(self) -> bool:
        return self.objective_ok and self.grad_ok


def energy_bound_checks(result: SolveResult, ell_norm: float, tr_norm: float, p: float,
                        rtol: float = 1e-9) -> EnergyBounds:
    """Check the a-priori bounds on a Neumann solution.

    ``ell_norm`` is the dual norm of the load and ``tr_norm`` the trace norm
    (any value at least the trace ratio of ``result.u`` keeps the check
    sound). Skipped when the load vanishes.
    """
    if ell_norm == 0.0:
        return EnergyBounds(skipped=True)
    lt = ell_norm * tr_norm
    alpha = result.objective
    lower = (1.0 - p) / p * lt ** (p / (p - 1.0))
    gnorm = result.energy ** (1.0 / p)
    upper = (2.0 * p * lt) ** (1.0 / (p - 1.0)) + 2.0 * abs(alpha) / lt
    return EnergyBounds(False, alpha, lower, alpha >= lower - rtol * abs(lower),
                        gnorm, upper, gnorm <= upper * (1.0 + rtol))


def brute_force_minimize(objective: Callable[[np.ndarray], float], dims: int, box,
                         grid_points: int | None = None, sweeps: int = 200,
                         rounds: int = 8, xtol: float = 1e-13,
                         derivatives: tuple[Callable, Callable] | None = None) -> np.ndarray:
    """Grid-search minimizer for at most 6 variables.

    Scans a uniform grid over ``box = (lo, hi)`` (scalars or per-dimension
    arrays), then polishes the best grid point by alternating rounds of
    cyclic coordinate descent (bounded Brent line searches) and Powell's
    method until a round no longer moves the point.  Deterministic.

    Values alone cannot locate a minimizer of a very flat objective, such as
    ``|t|^3`` near 0, beyond about the cube root of machine precision.  When
    ``derivatives = (jac, hess)`` is given, damped Newton steps on ``jac``
    follow, and their result is kept if it lowers the largest gradient
    component without raising the objective.
    """
    if dims > 6:
        raise ValueError("brute force is limited to 6 variables")
    if dims == 0:
        return np.empty(0)
    lo = np.broadcast_to(np.asarray(box[0], dtype=float), (dims,)).copy()
    hi = np.broadcast_to(np.asarray(box[1], dtype=float), (dims,)).copy()
    if grid_points is None:
        grid_points = int(min(41, max(5, round(30000 ** (1.0 / dims)))))
    axes = [np.linspace(a, b, grid_points) for a, b in zip(lo, hi)]
    best, x = np.inf, None
    for pt in itertools.product(*axes):
        v = objective(np.array(pt))
        if v < best:
            best, x = v, np.array(pt)
    width = (hi - lo) / (grid_points - 1)
    for _ in range(rounds):
        start = x.copy()
        x, width = _coordinate_descent(objective, x, lo, hi, width, sweeps, xtol)
        # conjugate directions fix slow progress along flat diagonal valleys
        r = optimize.minimize(objective, x, method="Powell", bounds=list(zip(lo, hi)),
                              options={"xtol": 1e-13, "ftol": 1e-17, "maxiter": 100000})
        if r.fun < objective(x):
            x = np.asarray(r.x, dtype=float)
        if np.abs(x - start).max() <= xtol * max(1.0, np.abs(x).max()):
            break
        width = np.maximum(width, 1e-8 * np.maximum(1.0, np.abs(x)))
    if derivatives is not None:
        jac, hess = derivatives
        y = _newton_roots(jac, hess, x, lo, hi)
        fx = objective(x)
        if (np.all(np.isfinite(y)) and np.all(y >= lo) and np.all(y <= hi)
                and np.abs(jac(y)).max() < np.abs(jac(x)).max()
                and objective(y) <= fx + 1e-15 * max(1.0, abs(fx))):
            x = y
    return x


def _newton_roots(jac, hess, x, lo, hi, max_iter=200):
    """Newton steps on ``jac = 0`` with backtracking on its largest component."""
    x = x.copy()
    res = np.abs(jac(x)).max()
    for _ in range(max_iter):
        if res == 0.0:
            break
        step = np.linalg.lstsq(hess(x), -jac(x), rcond=None)[0]
        t = 1.0
        while t > 1e-12:
            y = np.clip(x + t * step, lo, hi)
            r = np.abs(jac(y)).max()
            if r < res:
                break
            t *= 0.5
        else:
            break
        x, res = y, r
    return x


def _coordinate_descent(objective, x, lo, hi, width, sweeps, xtol):
    """Cyclic bounded Brent line searches; returns the point and step widths."""
    dims = len(x)
    width = width.copy()
    for _ in range(sweeps):
        moved = np.zeros(dims)
        for k in range(dims):
            a = max(lo[k], x[k] - width[k])
            b = min(hi[k], x[k] + width[k])
            while True:
                def line(t, k=k):
                    y = x.copy()
                    y[k] = t
                    return objective(y)
                r = optimize.minimize_scalar(line, bounds=(a, b), method="bounded",
                                             options={"xatol": 1e-14, "maxiter": 500})
                t = r.x if r.fun <= line(x[k]) else x[k]
                at_edge = (t - a < 0.01 * (b - a) and a > lo[k]) or (b - t < 0.01 * (b - a) and b < hi[k])
                if not at_edge:
                    break
                width[k] *= 4.0
                a = max(lo[k], x[k] - width[k])
                b = min(hi[k], x[k] + width[k])
            moved[k] = abs(t - x[k])
            x[k] = t
        if moved.max() <= xtol:
            break
        width = np.maximum(4.0 * moved, 1e-10 * np.maximum(1.0, np.abs(x)))
    return x, width
