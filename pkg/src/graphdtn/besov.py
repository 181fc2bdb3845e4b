"""Besov energies of boundary functions and dual norms of boundary functionals.

The homogeneous Besov energy of ``f`` is the double sum over ordered pairs
of distinct boundary vertices

    sum_{x != y} |f(y) - f(x)|^p * nu_x nu_y / (d(x, y)^(theta p) nu(B(y, d(x, y))))

with closed balls. Since the summand is symmetric in ``|f(y) - f(x)|``,
the kernel is stored per unordered pair as ``w(x, y) + w(y, x)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, sparse

from . import _newton
from .graph import BesovParams, MetricMeasureGraph

SUM_ZERO_RTOL = 1e-12
DUAL_EXACT_ITER = 25


class FunctionalError(ValueError):
    """A boundary functional fails to annihilate constants."""


@dataclass(frozen=True)
class BesovKernel:
    params: BesovParams
    nu: np.ndarray          # boundary measure, boundary order
    ordered: np.ndarray     # (nb, nb) weights w(x, y), zero diagonal
    pairs: np.ndarray       # (P, 2) unordered pairs i < j
    weights: np.ndarray     # (P,) w(i, j) + w(j, i)

    @property
    def p(self) -> float:
        return self.params.p

    @property
    def size(self) -> int:
        return len(self.nu)

    def difference_matrix(self) -> sparse.csr_matrix:
        """(P, nb) matrix mapping f to ``f[j] - f[i]`` per pair."""
        P = len(self.pairs)
        rows = np.repeat(np.arange(P), 2)
        vals = np.tile([-1.0, 1.0], P)
        return sparse.csr_matrix((vals, (rows, self.pairs.reshape(-1))), shape=(P, self.size))

    def quadratic_form(self) -> np.ndarray:
        """Matrix ``K`` with ``besov_energy(f) = f @ K @ f`` when p = 2."""
        B = self.difference_matrix()
        return (B.T @ sparse.diags(self.weights) @ B).toarray()


def besov_kernel(graph: MetricMeasureGraph, params: BesovParams) -> BesovKernel:
    b = graph.boundary
    d = graph.distances[np.ix_(b, b)]
    nu = graph.nu[b].copy()
    nb = len(b)
    # ball[x, y] = nu(B(y, d(x, y))), closed ball around y
    ball = np.empty((nb, nb))
    for y in range(nb):
        order = np.argsort(d[y], kind="stable")
        csum = np.cumsum(nu[order])
        r = d[:, y] + 1e-12 * np.maximum(d[:, y], 1.0)
        ball[:, y] = csum[np.searchsorted(d[y, order], r, side="right") - 1]
    off = ~np.eye(nb, dtype=bool)
    w = np.zeros((nb, nb))
    w[off] = (np.outer(nu, nu)[off]
              / (d[off] ** (params.theta * params.p) * ball[off]))
    i, j = np.triu_indices(nb, k=1)
    return BesovKernel(params, nu, w, np.column_stack([i, j]), w[i, j] + w[j, i])


def besov_energy(f: np.ndarray, kernel: BesovKernel, p: float | None = None) -> float:
    p = kernel.p if p is None else p
    f = np.asarray(f, dtype=float)
    diff = f[kernel.pairs[:, 1]] - f[kernel.pairs[:, 0]]
    return float(kernel.weights @ np.abs(diff) ** p)


def besov_seminorm(f: np.ndarray, kernel: BesovKernel) -> float:
    return besov_energy(f, kernel) ** (1.0 / kernel.p)


def besov_energy_grad(f: np.ndarray, kernel: BesovKernel) -> np.ndarray:
    p = kernel.p
    diff = f[kernel.pairs[:, 1]] - f[kernel.pairs[:, 0]]
    t = kernel.weights * p * _newton.flux(diff, p)
    out = np.zeros(kernel.size)
    np.add.at(out, kernel.pairs[:, 1], t)
    np.add.at(out, kernel.pairs[:, 0], -t)
    return out


def nu_mean_zero(f: np.ndarray, nu: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    return f - (nu @ f) / nu.sum()


def lp_boundary_norm(f: np.ndarray, nu: np.ndarray, p: float) -> float:
    """``(sum nu |f|^p)^(1/p)``; reported as a diagnostic only."""
    return float((nu @ np.abs(f) ** p) ** (1.0 / p))


def check_functional(ell: np.ndarray, renormalize: bool = False) -> np.ndarray:
    """Return ``ell`` as a sum-zero weight vector.

    Raises :class:`FunctionalError` when ``|sum ell| > 1e-12 * max|ell|``
    unless ``renormalize`` is set, in which case the mean is subtracted.
    """
    ell = np.asarray(ell, dtype=float)
    if not np.all(np.isfinite(ell)):
        raise FunctionalError("functional has non-finite weights")
    if renormalize:
        return ell - ell.mean()
    scale = np.abs(ell).max(initial=0.0)
    if abs(ell.sum()) > SUM_ZERO_RTOL * scale:
        raise FunctionalError("functional does not annihilate constants")
    return ell


def dual_norm(ell: np.ndarray, kernel: BesovKernel, method: str = "auto",
              renormalize: bool = False, grad_tol: float = 1e-10,
              return_maximizer: bool = False):
    """Norm of ``g -> sum ell_z g_z`` against the Besov seminorm.

    Computed from the maximizer ``g*`` of ``ell . g - besov_energy(g) / p``
    (a strictly convex problem on nu-mean-zero ``g``), at which the ratio
    ``ell . g* / |g*|_B`` attains the supremum. ``method="closed"`` (p = 2
    only) uses ``sqrt(ell K^+ ell)`` with the Besov quadratic form ``K``;
    ``"iterative"`` runs the Newton solver; ``"auto"`` picks closed form at
    p = 2.

    With ``return_maximizer`` the normalized maximizer ``g*/|g*|_B`` is also
    returned; it is the gradient of the dual norm with respect to ``ell``.
    """
    ell = check_functional(ell, renormalize)
    p = kernel.p
    scale = np.abs(ell).max(initial=0.0)
    if scale == 0.0:
        return (0.0, np.zeros_like(ell)) if return_maximizer else 0.0
    if method == "auto":
        method = "closed" if p == 2.0 else "iterative"
    e = ell / scale
    if method == "closed":
        if p != 2.0:
            raise ValueError("closed-form dual norm needs p = 2")
        g = _pinned_solve(kernel.quadratic_form(), e, kernel.nu)
    elif method == "iterative":
        g = _dual_maximizer(e, kernel, grad_tol)
    else:
        raise ValueError(f"unknown method {method!r}")
    nrm = besov_seminorm(g, kernel)
    value = float(e @ g / nrm) * scale
    if return_maximizer:
        return value, g / nrm
    return value


def _pinned_solve(K, rhs, w):
    q = w / np.linalg.norm(w)
    M = K + np.mean(np.diag(K)) * np.outer(q, q)
    return linalg.solve(M, rhs, assume_a="pos")


def _dual_maximizer(e, kernel, grad_tol):
    p = kernel.p
    K = kernel.quadratic_form()
    g2 = _pinned_solve(K, e, kernel.nu)
    # optimal multiple of the p = 2 maximizer as the starting point
    t = (e @ g2 / besov_energy(g2, kernel)) ** (1.0 / (p - 1.0))
    prob = _newton.EdgeEnergyProblem(kernel.difference_matrix(), kernel.weights, p, e,
                                     np.arange(kernel.size), pin=kernel.nu)
    # the ratio at g is second order in the error of g, so a short exact
    # stage suffices even where p < 2 near-ties slow Newton down
    g, info = _newton.minimize(prob, t * g2, eps_schedule=(1e-2, 1e-4, 1e-6, 1e-8),
                               grad_tol=grad_tol, max_iter=DUAL_EXACT_ITER)
    return g
