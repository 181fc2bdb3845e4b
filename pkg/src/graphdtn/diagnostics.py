"""Standing-assumption diagnostics: doubling, codimension and Poincare constants.

These are reported, never enforced; thresholds are the caller's business.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from . import _newton
from .ascent import NormEstimate, complement_basis, multistart_maximize, top_generalized_eig
from .config import SolverConfig
from .graph import GraphError, MetricMeasureGraph, ball_table
from .sobolev import p_energy, p_energy_grad


def _radius_grid(graph, center, rmax):
    d = np.unique(graph.distances[center])
    return d[(d > 0) & (d <= rmax * (1 + 1e-12))]


def doubling_constant(graph: MetricMeasureGraph, which: str = "mu") -> float:
    """``max ball(x, 2r) / ball(x, r)`` over vertices ``x`` and realized radii.

    Radii range over ``{d(x, z)} & (0, diam]``. Balls of zero measure in the
    chosen measure (e.g. ``nu`` around an interior point) are skipped.
    """
    diam = float(graph.distances.max())
    best = 1.0
    for x in range(graph.n):
        r = _radius_grid(graph, x, diam)
        if len(r) == 0:
            continue
        small = ball_table(graph, x, r, which)
        big = ball_table(graph, x, 2.0 * r, which)
        ok = small > 0
        if np.any(ok):
            best = max(best, float((big[ok] / small[ok]).max()))
    return best


class CodimensionFit(NamedTuple):
    Theta: float
    C: float
    n_pairs: int
    n_excluded: int


def fit_codimension(radii, mu_ball, nu_ball) -> CodimensionFit:
    """Least-squares fit of ``log nu(B) = log mu(B) - Theta log r + c``.

    ``C`` is ``exp(max |residual|)``, the smallest constant making the
    two-sided comparison hold on the data. Pairs with a vanishing ball
    measure are excluded.
    """
    r = np.asarray(radii, dtype=float)
    mb = np.asarray(mu_ball, dtype=float)
    nb = np.asarray(nu_ball, dtype=float)
    keep = (r > 0) & (mb > 0) & (nb > 0)
    if len(np.unique(r[keep])) < 2:
        raise GraphError("codimension fit needs at least two distinct radii")
    x = np.log(r[keep])
    y = np.log(nb[keep]) - np.log(mb[keep])
    A = np.column_stack([np.ones_like(x), -x])
    (c, theta), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ np.array([c, theta])
    return CodimensionFit(float(theta), float(np.exp(np.abs(resid).max())),
                          int(keep.sum()), int((~keep).sum()))


def codimension_samples(graph: MetricMeasureGraph):
    """``(radii, mu_ball, nu_ball)`` over boundary centers and realized radii
    ``0 < r < 2 diam(boundary)``."""
    B = graph.boundary
    if len(B) < 2:
        raise GraphError("codimension fit needs at least two boundary vertices")
    dB = float(graph.distances[np.ix_(B, B)].max())
    rs, ms, ns = [], [], []
    for x in B:
        d = np.unique(graph.distances[x])
        r = d[(d > 0) & (d < 2.0 * dB)]
        rs.append(r)
        ms.append(ball_table(graph, x, r, "mu"))
        ns.append(ball_table(graph, x, r, "nu"))
    return np.concatenate(rs), np.concatenate(ms), np.concatenate(ns)


def codimension_fit(graph: MetricMeasureGraph) -> CodimensionFit:
    """Estimate the codimension exponent of ``nu`` relative to ``mu``."""
    return fit_codimension(*codimension_samples(graph))


def radius_scan(graph: MetricMeasureGraph) -> tuple[np.ndarray, np.ndarray]:
    """Per radius, the mean of ``log(nu(B)/mu(B))`` over boundary centers.

    Returned with strictly increasing radii; meant for plotting next to the
    fitted line.
    """
    r, m, n = codimension_samples(graph)
    keep = (m > 0) & (n > 0)
    r, y = r[keep], np.log(n[keep]) - np.log(m[keep])
    key = np.round(r, 12)
    radii, inv = np.unique(key, return_inverse=True)
    sums = np.bincount(inv, weights=y)
    return radii, sums / np.bincount(inv)


def interior_view(graph: MetricMeasureGraph) -> MetricMeasureGraph:
    """Subgraph induced on the interior vertices, all treated as carrying ``mu``."""
    I = graph.interior
    keep = set(int(i) for i in I)
    sel = [k for k, (a, b) in enumerate(graph.edges) if a in keep and b in keep]
    return MetricMeasureGraph(
        [graph.ids[i] for i in I], np.zeros(len(I), dtype=bool), graph.mu[I], np.zeros(len(I)),
        [(graph.ids[a], graph.ids[b]) for a, b in graph.edges[sel]],
        graph.lengths[sel], graph.edge_mu[sel],
        None if graph.pos is None else graph.pos[I])


def poincare_constant(graph: MetricMeasureGraph, p: float, cfg: SolverConfig | None = None,
                      interior_only: bool = False, method: str = "auto") -> NormEstimate:
    """Best constant in ``|u - mean u|_{L^p(mu)} <= C |grad u|_p``.

    The mean and the L^p norm use the interior measure ``mu``; the gradient
    runs over all edges (or only interior edges with ``interior_only``).
    Exact at p = 2 through a generalized eigenproblem, a multi-start lower
    bound otherwise.
    """
    G = interior_view(graph) if interior_only else graph
    cfg = cfg or SolverConfig(p=p)
    mu = G.mu
    M = np.diag(mu)
    Lap = G.laplacian.toarray()
    Q = complement_basis(mu)
    if method == "auto":
        method = "eig" if p == 2.0 else "ascent"
    if method == "eig":
        if p != 2.0:
            raise ValueError("eigen method needs p = 2")
        lam, u = top_generalized_eig(M, Lap, Q)
        return NormEstimate(float(np.sqrt(lam)), u, True, "eig")
    w = mu / mu.sum()

    def fun(u):
        v = u - w @ u
        num = float(mu @ np.abs(v) ** p)
        den = p_energy(u, G, p)
        if num <= 0.0 or den <= 0.0:
            return -np.inf, np.zeros_like(u)
        gn = p * mu * _newton.flux(v, p)
        gn = gn - w * gn.sum()
        grad = gn / num - p_energy_grad(u, G, p) / den
        return (np.log(num) - np.log(den)) / p, grad / p

    _, vecs = np.linalg.eigh(Q.T @ Lap @ Q)
    lam_vecs = top_generalized_eig(M, Lap, Q)[1]
    seeds = [lam_vecs] + [Q @ vecs[:, k] for k in range(min(3, vecs.shape[1]))]
    rng = cfg.rng(31)
    while len(seeds) < cfg.restarts:
        seeds.append(rng.standard_normal(G.n))
    val, u = multistart_maximize(fun, seeds, maxiter=cfg.ascent_iter)
    return NormEstimate(float(np.exp(val)), u - w @ u, False, "ascent")
