"""Discrete calculus on a metric measure graph.

Gradients live on oriented edges, ``g_e = (u(y) - u(x)) / length_e``, and
the p-energy is ``sum_e edge_mu_e |g_e|^p``. The p-Laplacian is defined so
that the Green identity

    pairing(u; v) == sum_z p_laplacian(u)[z] * v[z]

holds exactly, i.e. ``p_laplacian(u) = D^T (edge_mu * |Du|^(p-2) Du)``.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
from scipy import linalg, optimize

from . import _newton
from .ascent import NormEstimate, complement_basis, multistart_maximize, top_generalized_eig
from .besov import BesovKernel, besov_energy, besov_energy_grad, besov_kernel
from .config import SolverConfig
from .graph import BesovParams, GraphError, MetricMeasureGraph


def gradient(u: np.ndarray, graph: MetricMeasureGraph) -> np.ndarray:
    return graph.gradient_matrix @ np.asarray(u, dtype=float)


def p_energy(u: np.ndarray, graph: MetricMeasureGraph, p: float) -> float:
    g = gradient(u, graph)
    return float(graph.edge_mu @ np.abs(g) ** p)


def p_energy_grad(u: np.ndarray, graph: MetricMeasureGraph, p: float) -> np.ndarray:
    return p * p_laplacian(u, graph, p)


def pairing(u: np.ndarray, v: np.ndarray, graph: MetricMeasureGraph, p: float) -> float:
    """``sum_e edge_mu_e |g_e(u)|^(p-2) g_e(u) g_e(v)``; the flux is 0 where g_e(u) = 0."""
    gu = gradient(u, graph)
    gv = gradient(v, graph)
    return float((graph.edge_mu * _newton.flux(gu, p)) @ gv)


def p_laplacian(u: np.ndarray, graph: MetricMeasureGraph, p: float) -> np.ndarray:
    gu = gradient(u, graph)
    return graph.gradient_matrix.T @ (graph.edge_mu * _newton.flux(gu, p))


def p_laplacian_jacobian(u: np.ndarray, graph: MetricMeasureGraph, p: float,
                         floor: float = 0.0) -> np.ndarray:
    """Dense Jacobian of :func:`p_laplacian` at ``u``.

    For p < 2 the edge factor ``(p-1)|g|^(p-2)`` is capped by evaluating it
    at ``max(|g|, floor)``.
    """
    D = graph.gradient_matrix
    w = graph.edge_mu * _newton.dflux(gradient(u, graph), p, 0.0, floor)
    return (D.T @ (D.multiply(w[:, None]))).toarray()


def trace(u: np.ndarray, graph: MetricMeasureGraph) -> np.ndarray:
    return np.asarray(u, dtype=float)[graph.boundary]


def mu_mean_zero(u: np.ndarray, graph: MetricMeasureGraph) -> np.ndarray:
    """Shift ``u`` so that its mu-weighted mean over interior vertices is 0."""
    u = np.asarray(u, dtype=float)
    return u - (graph.mu @ u) / graph.mu.sum()


def extension_matrix(graph: MetricMeasureGraph) -> np.ndarray:
    """Dense (n, nb) matrix of the 2-harmonic extension."""
    L = graph.laplacian
    I, B = graph.interior, graph.boundary
    Lii = L[I][:, I].toarray()
    Lib = L[I][:, B].toarray()
    E = np.zeros((graph.n, len(B)))
    E[B, np.arange(len(B))] = 1.0
    E[I] = -linalg.solve(Lii, Lib, assume_a="sym")
    return E


def extend_linear(g: np.ndarray, graph: MetricMeasureGraph) -> np.ndarray:
    """2-harmonic extension: u = g on the boundary, weighted Laplacian 0 inside."""
    g = np.asarray(g, dtype=float)
    L = graph.laplacian
    I, B = graph.interior, graph.boundary
    u = np.empty(graph.n)
    u[B] = g
    rhs = -(L[I][:, B] @ g)
    u[I] = linalg.solve(L[I][:, I].toarray(), rhs, assume_a="sym")
    return u


def harmonic_schur(graph: MetricMeasureGraph) -> np.ndarray:
    """Schur complement of the weighted Laplacian onto the boundary.

    This is the p = 2 Dirichlet-to-Neumann matrix and the Gram matrix of the
    extension energy: ``p_energy(extend_linear(g), 2) == g @ S @ g``.
    """
    L = graph.laplacian.toarray()
    I, B = graph.interior, graph.boundary
    S = L[np.ix_(B, B)] - L[np.ix_(B, I)] @ linalg.solve(L[np.ix_(I, I)], L[np.ix_(I, B)], assume_a="pos")
    return 0.5 * (S + S.T)


def capacity_p(S: Iterable[str | int], graph: MetricMeasureGraph, p: float,
               cfg: SolverConfig | None = None) -> float:
    """p-capacity of a vertex set.

    Minimizes ``(sum_x mu_x |u_x|^p)^(1/p) + p_energy(u)^(1/p)`` over
    ``0 <= u <= 1`` with ``u = 1`` on ``S`` (bound-constrained L-BFGS).
    """
    cfg = cfg or SolverConfig(p=p)
    idx = sorted({graph.index[s] if isinstance(s, str) else int(s) for s in S})
    if not idx:
        raise GraphError("capacity needs a nonempty vertex set")
    fixed = np.zeros(graph.n, dtype=bool)
    fixed[idx] = True
    free = np.flatnonzero(~fixed)

    def full(x):
        u = np.ones(graph.n)
        u[free] = x
        return u

    def fun(x):
        u = full(x)
        a = float(graph.mu @ np.abs(u) ** p)
        b = p_energy(u, graph, p)
        val = a ** (1 / p) + b ** (1 / p)
        ga = p * graph.mu * _newton.flux(u, p)
        gb = p_energy_grad(u, graph, p)
        grad = np.zeros(graph.n)
        if a > 0:
            grad += a ** (1 / p - 1) / p * ga
        if b > 0:
            grad += b ** (1 / p - 1) / p * gb
        return val, grad[free]

    if len(free) == 0:
        return fun(np.empty(0))[0]
    best = np.inf
    for x0 in (np.zeros(len(free)), np.ones(len(free)), np.full(len(free), 0.5)):
        res = optimize.minimize(fun, x0, jac=True, method="L-BFGS-B",
                                bounds=[(0.0, 1.0)] * len(free),
                                options={"maxiter": 10 * cfg.max_iter, "ftol": 1e-15, "gtol": 1e-12})
        best = min(best, float(res.fun))
    return best


def _kernel(graph, params):
    return params if isinstance(params, BesovKernel) else besov_kernel(graph, params)


def trace_ratio(u: np.ndarray, graph: MetricMeasureGraph, kernel: BesovKernel) -> float:
    """``|Tr u|_B / |grad u|_p``."""
    e = p_energy(u, graph, kernel.p)
    return (besov_energy(trace(u, graph), kernel) / e) ** (1.0 / kernel.p)


def extension_ratio(g: np.ndarray, graph: MetricMeasureGraph, kernel: BesovKernel) -> float:
    """``|grad E g|_p / |g|_B``."""
    e = p_energy(extend_linear(g, graph), graph, kernel.p)
    return (e / besov_energy(g, kernel)) ** (1.0 / kernel.p)


def trace_norm(graph: MetricMeasureGraph, params: BesovParams | BesovKernel,
               cfg: SolverConfig | None = None, method: str = "auto",
               extra_starts: Sequence[np.ndarray] = ()) -> NormEstimate:
    """Operator norm of the trace from the p-energy seminorm to the Besov seminorm."""
    kernel = _kernel(graph, params)
    p = kernel.p
    cfg = cfg or SolverConfig(p=p)
    B = graph.boundary
    Kfull = np.zeros((graph.n, graph.n))
    Kfull[np.ix_(B, B)] = kernel.quadratic_form()
    Lap = graph.laplacian.toarray()
    Q = complement_basis(graph.mu)
    if method == "auto":
        method = "eig" if p == 2.0 else "ascent"
    if method == "eig":
        if p != 2.0:
            raise ValueError("eigen method needs p = 2")
        lam, u = top_generalized_eig(Kfull, Lap, Q)
        return NormEstimate(float(np.sqrt(lam)), mu_mean_zero(u, graph), True, "eig")

    def fun(u):
        nb_ = besov_energy(u[B], kernel)
        e = p_energy(u, graph, p)
        if nb_ <= 0.0 or e <= 0.0:
            return -np.inf, np.zeros_like(u)
        grad = -p_energy_grad(u, graph, p) / e
        grad[B] += besov_energy_grad(u[B], kernel) / nb_
        return (np.log(nb_) - np.log(e)) / p, grad / p

    rng = cfg.rng(11)
    seeds = list(extra_starts)
    vals, vecs = linalg.eigh(Q.T @ Kfull @ Q, Q.T @ Lap @ Q)
    seeds += [Q @ vecs[:, -k] for k in range(1, min(3, vecs.shape[1]) + 1)]
    while len(seeds) < cfg.restarts + len(extra_starts):
        seeds.append(extend_linear(rng.standard_normal(len(B)), graph)
                     + 0.1 * rng.standard_normal(graph.n))
    val, u = multistart_maximize(fun, seeds, maxiter=cfg.ascent_iter)
    return NormEstimate(float(np.exp(val)), mu_mean_zero(u, graph), False, "ascent")


def extension_norm(graph: MetricMeasureGraph, params: BesovParams | BesovKernel,
                   cfg: SolverConfig | None = None, method: str = "auto",
                   extra_starts: Sequence[np.ndarray] = ()) -> NormEstimate:
    """Operator norm of the 2-harmonic extension from the Besov seminorm to the p-energy seminorm."""
    kernel = _kernel(graph, params)
    p = kernel.p
    cfg = cfg or SolverConfig(p=p)
    K = kernel.quadratic_form()
    S = harmonic_schur(graph)
    Q = complement_basis(kernel.nu)
    if method == "auto":
        method = "eig" if p == 2.0 else "ascent"
    if method == "eig":
        if p != 2.0:
            raise ValueError("eigen method needs p = 2")
        lam, g = top_generalized_eig(S, K, Q)
        return NormEstimate(float(np.sqrt(lam)), g, True, "eig")

    E = extension_matrix(graph)

    def fun(g):
        u = E @ g
        e = p_energy(u, graph, p)
        nb_ = besov_energy(g, kernel)
        if nb_ <= 0.0 or e <= 0.0:
            return -np.inf, np.zeros_like(g)
        grad = E.T @ p_energy_grad(u, graph, p) / e - besov_energy_grad(g, kernel) / nb_
        return (np.log(e) - np.log(nb_)) / p, grad / p

    rng = cfg.rng(12)
    seeds = list(extra_starts)
    vals, vecs = linalg.eigh(Q.T @ S @ Q, Q.T @ K @ Q)
    seeds += [Q @ vecs[:, -k] for k in range(1, min(3, vecs.shape[1]) + 1)]
    while len(seeds) < cfg.restarts + len(extra_starts):
        seeds.append(rng.standard_normal(len(graph.boundary)))
    val, g = multistart_maximize(fun, seeds, maxiter=cfg.ascent_iter)
    return NormEstimate(float(np.exp(val)), g - kernel.nu @ g / kernel.nu.sum(), False, "ascent")
