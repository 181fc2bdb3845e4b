"""Dirichlet-to-Neumann and Neumann-to-Dirichlet maps and their norms.

``dtn_apply(f)`` solves the Dirichlet problem and returns the boundary
values of the p-Laplacian of the solution, the discrete normal derivative.
By the exact Green identity, ``dtn_apply(f) @ g == pairing(u_f; v)`` for
every vertex function ``v`` with trace ``g``, whichever extension is used.

``ntd_apply(ell)`` solves the Neumann problem and returns the nu-mean-zero
trace of its solution.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .ascent import NormEstimate, complement_basis, multistart_maximize, top_generalized_eig
from .besov import (BesovKernel, besov_energy, besov_energy_grad, besov_kernel,
                    besov_seminorm, dual_norm, nu_mean_zero)
from .config import SolverConfig
from .graph import BesovParams, MetricMeasureGraph
from .sobolev import (extension_norm, harmonic_schur, p_energy, p_laplacian,
                      p_laplacian_jacobian, trace_norm, trace_ratio)
from .solvers import SolveResult, solve_dirichlet, solve_neumann


def c_p(p: float) -> float:
    """``[(2p)^(1/(p-1)) + 2(p-1)/p]^(-1)``."""
    return 1.0 / ntd_constant(p)


def ntd_constant(p: float) -> float:
    return (2.0 * p) ** (1.0 / (p - 1.0)) + 2.0 * (p - 1.0) / p


def dtn_apply(f: np.ndarray, graph: MetricMeasureGraph, cfg: SolverConfig,
              return_solution: bool = False):
    """Boundary functional of the p-harmonic extension of ``f``.

    The mean of the result is removed; it equals minus the interior
    residual of the solve divided by the boundary size, so it is at
    solver-tolerance level.
    """
    res = solve_dirichlet(f, graph, cfg)
    ell = p_laplacian(res.u, graph, cfg.p)[graph.boundary]
    ell = ell - ell.mean()
    return (ell, res) if return_solution else ell


def ntd_apply(ell: np.ndarray, graph: MetricMeasureGraph, cfg: SolverConfig,
              renormalize: bool = False, return_solution: bool = False):
    res = solve_neumann(ell, graph, cfg, renormalize=renormalize)
    f = nu_mean_zero(res.u[graph.boundary], graph.nu_boundary)
    return (f, res) if return_solution else f


def _kernel(graph, params):
    return params if isinstance(params, BesovKernel) else besov_kernel(graph, params)


@dataclass
class RoundTrip:
    dirichlet_error: float   # max |NtD(DtN f) - f|_B / |f|_B
    neumann_error: float     # max |DtN(NtD l) - l|_* / |l|_*
    trials: int


def roundtrip_check(graph: MetricMeasureGraph, params: BesovParams | BesovKernel,
                    cfg: SolverConfig, trials: int = 10) -> RoundTrip:
    kernel = _kernel(graph, params)
    rng = cfg.rng(21)
    nb = len(graph.boundary)
    ef = el = 0.0
    for _ in range(trials):
        f = nu_mean_zero(rng.standard_normal(nb), kernel.nu)
        back = ntd_apply(dtn_apply(f, graph, cfg), graph, cfg, renormalize=True)
        ef = max(ef, besov_seminorm(back - f, kernel) / besov_seminorm(f, kernel))
        ell = rng.standard_normal(nb)
        ell -= ell.mean()
        again = dtn_apply(ntd_apply(ell, graph, cfg), graph, cfg)
        el = max(el, dual_norm(again - ell, kernel, renormalize=True) / dual_norm(ell, kernel))
    return RoundTrip(ef, el, trials)


def _quadratic_pieces(graph, kernel):
    """p = 2 matrices: Schur complement S, Besov form K and pseudo-inverses
    of both on the sum-zero / nu-mean-zero pair of subspaces."""
    S = harmonic_schur(graph)
    K = kernel.quadratic_form()
    Q = complement_basis(kernel.nu)
    Kinv = Q @ linalg.inv(Q.T @ K @ Q) @ Q.T
    Sinv = Q @ linalg.inv(Q.T @ S @ Q) @ Q.T
    return S, K, Q, 0.5 * (Kinv + Kinv.T), 0.5 * (Sinv + Sinv.T)


class _DtNRatio:
    """``log(|DtN f|_* / |f|_B^(p-1))`` and its gradient in ``f``.

    The gradient of the dual norm with respect to the functional is the
    normalized dual maximizer ``ghat``; the derivative of DtN at ``f`` is
    the Schur complement of the p-Laplacian Jacobian at ``u_f``.
    """

    def __init__(self, graph, kernel, cfg):
        self.graph, self.kernel, self.cfg = graph, kernel, cfg

    def evaluate(self, f):
        graph, kernel, p = self.graph, self.kernel, self.cfg.p
        ell, res = dtn_apply(f, graph, self.cfg, return_solution=True)
        J, ghat = dual_norm(ell, kernel, renormalize=True, return_maximizer=True)
        nf = besov_energy(f, kernel)
        return ell, res, J, ghat, nf

    def __call__(self, f):
        graph, p = self.graph, self.cfg.p
        ell, res, J, ghat, nf = self.evaluate(f)
        if J <= 0.0 or nf <= 0.0:
            return -np.inf, np.zeros_like(f)
        I, B = graph.interior, graph.boundary
        gscale = np.abs(graph.gradient_matrix @ res.u).max()
        Jac = p_laplacian_jacobian(res.u, graph, p, floor=1e-9 * gscale)
        w = -linalg.solve(Jac[np.ix_(I, I)], Jac[np.ix_(I, B)] @ ghat, assume_a="pos")
        dJ = Jac[np.ix_(B, B)] @ ghat + Jac[np.ix_(B, I)] @ w
        value = np.log(J) - (p - 1.0) / p * np.log(nf)
        grad = dJ / J - (p - 1.0) / p * besov_energy_grad(f, self.kernel) / nf
        return value, grad


def _dtn_seeds(graph, kernel, cfg, smallest):
    S, K, Q, Kinv, _ = _quadratic_pieces(graph, kernel)
    vals, vecs = linalg.eigh(Q.T @ S @ Kinv @ S @ Q, Q.T @ K @ Q)
    order = range(min(3, vecs.shape[1])) if smallest else range(-1, -min(3, vecs.shape[1]) - 1, -1)
    seeds = [Q @ vecs[:, k] for k in order]
    rng = cfg.rng(31 if smallest else 32)
    while len(seeds) < cfg.restarts:
        seeds.append(nu_mean_zero(rng.standard_normal(len(kernel.nu)), kernel.nu))
    return seeds


def dtn_norm(graph: MetricMeasureGraph, params: BesovParams | BesovKernel,
             cfg: SolverConfig, method: str = "auto") -> NormEstimate:
    """``sup |DtN f|_* / |f|_B^(p-1)``; the witness is a boundary function."""
    kernel = _kernel(graph, params)
    _check_p(kernel, cfg)
    if method == "auto":
        method = "eig" if cfg.p == 2.0 else "ascent"
    if method == "eig":
        if cfg.p != 2.0:
            raise ValueError("eigen method needs p = 2")
        S, K, Q, Kinv, _ = _quadratic_pieces(graph, kernel)
        lam, f = top_generalized_eig(S @ Kinv @ S, K, Q)
        return NormEstimate(float(np.sqrt(lam)), f, True, "eig")
    ratio = _DtNRatio(graph, kernel, cfg)
    val, f = multistart_maximize(ratio, _dtn_seeds(graph, kernel, cfg, False),
                                 maxiter=cfg.ascent_iter)
    f = nu_mean_zero(f, kernel.nu)
    return NormEstimate(dtn_ratio(f, graph, kernel, cfg), f, False, "ascent")


def dtn_ratio(f, graph, params, cfg) -> float:
    kernel = _kernel(graph, params)
    ell = dtn_apply(f, graph, cfg)
    return dual_norm(ell, kernel, renormalize=True) / besov_seminorm(f, kernel) ** (cfg.p - 1.0)


def ntd_ratio(ell, graph, params, cfg) -> float:
    kernel = _kernel(graph, params)
    f = ntd_apply(ell, graph, cfg, renormalize=True)
    return besov_seminorm(f, kernel) / dual_norm(ell, kernel, renormalize=True) ** (1.0 / (cfg.p - 1.0))


def ntd_norm(graph: MetricMeasureGraph, params: BesovParams | BesovKernel,
             cfg: SolverConfig, method: str = "auto") -> NormEstimate:
    """``sup |NtD l|_B / |l|_*^(1/(p-1))``; the witness is a functional.

    For p != 2 the search runs over Dirichlet data: every sum-zero ``l`` is
    ``DtN(f)`` for ``f = NtD(l)``, so the supremum equals
    ``(inf_f |DtN f|_* / |f|_B^(p-1))^(-1/(p-1))``. The reported value is
    recomputed directly from a Neumann solve at the witness.
    """
    kernel = _kernel(graph, params)
    _check_p(kernel, cfg)
    if method == "auto":
        method = "eig" if cfg.p == 2.0 else "ascent"
    if method == "eig":
        if cfg.p != 2.0:
            raise ValueError("eigen method needs p = 2")
        S, K, Q, Kinv, Sinv = _quadratic_pieces(graph, kernel)
        Z = complement_basis(np.ones(len(kernel.nu)))
        lam, ell = top_generalized_eig(Sinv @ K @ Sinv, Kinv, Z)
        return NormEstimate(float(np.sqrt(lam)), ell, True, "eig")
    ratio = _DtNRatio(graph, kernel, cfg)

    def neg(f):
        v, g = ratio(f)
        if not np.isfinite(v):
            return -np.inf, g
        return -v, -g

    _, f = multistart_maximize(neg, _dtn_seeds(graph, kernel, cfg, True), maxiter=cfg.ascent_iter)
    ell = dtn_apply(f, graph, cfg)
    return NormEstimate(ntd_ratio(ell, graph, kernel, cfg), ell, False, "ascent")


def _check_p(kernel, cfg):
    if kernel.p != cfg.p:
        raise ValueError(f"Besov exponent {kernel.p} differs from solver exponent {cfg.p}")


@dataclass
class NormReport:
    """Norms of trace, extension, DtN and NtD with the inequality verdicts.

    ``upper_ok``: |DtN| <= |E|^p. ``ntd_ok``: |NtD| <= C_p |Tr|^(p/(p-1))
    with ``C_p = 1/c_p``. ``lower_gap`` = |DtN| - c_p |Tr|^(p/(1-p)) is
    reported, not asserted; ``lower_gap_homogeneity`` is the same gap for
    the bound |DtN| >= |NtD|^(1-p) >= c_p^(p-1) |Tr|^(-p).
    """

    p: float
    theta: float
    tr_norm: float
    ext_norm: float
    dtn_norm: float
    ntd_norm: float
    tr_certified: bool
    ext_certified: bool
    dtn_certified: bool
    ntd_certified: bool
    c_p: float
    upper_ok: bool
    ntd_ok: bool
    lf_bound_ok: bool
    lower_gap: float
    lower_gap_homogeneity: float
    roundtrip_err: float
    witnesses: dict = field(default_factory=dict, repr=False)

    def as_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k != "witnesses"}
        out["witnesses"] = {k: [float(x) for x in v] for k, v in self.witnesses.items()}
        return out


def bounds_report(graph: MetricMeasureGraph, params: BesovParams, cfg: SolverConfig,
                  roundtrip_trials: int = 2, rtol: float = 1e-6) -> NormReport:
    """Compute all four norms and evaluate the norm inequalities.

    The witnesses of the DtN/NtD searches are fed as extra starting points
    to the trace and extension searches, so the (lower-bound) estimates of
    |Tr| and |E| dominate the ratios those witnesses realize.
    """
    kernel = _kernel(graph, params)
    _check_p(kernel, cfg)
    p = cfg.p
    dn = dtn_norm(graph, kernel, cfg)
    nn = ntd_norm(graph, kernel, cfg)
    f_star = dn.witness
    ell_star, u_f = dtn_apply(f_star, graph, cfg, return_solution=True)
    _, g_hat = dual_norm(ell_star, kernel, renormalize=True, return_maximizer=True)
    f_ntd, u_l = ntd_apply(nn.witness, graph, cfg, renormalize=True, return_solution=True)
    tr = trace_norm(graph, kernel, cfg, extra_starts=[u_l.u, u_f.u])
    ext = extension_norm(graph, kernel, cfg, extra_starts=[f_star, g_hat, f_ntd])
    cp = c_p(p)
    lf = dual_norm(ell_star, kernel, renormalize=True)
    lf_ok = lf <= ext.value ** p * besov_seminorm(f_star, kernel) ** (p - 1.0) * (1 + rtol)
    rt = roundtrip_check(graph, kernel, cfg, roundtrip_trials)
    return NormReport(
        p=p, theta=kernel.params.theta,
        tr_norm=tr.value, ext_norm=ext.value, dtn_norm=dn.value, ntd_norm=nn.value,
        tr_certified=tr.certified, ext_certified=ext.certified,
        dtn_certified=dn.certified, ntd_certified=nn.certified,
        c_p=cp,
        upper_ok=bool(dn.value <= ext.value ** p * (1 + rtol)),
        ntd_ok=bool(nn.value <= ntd_constant(p) * tr.value ** (p / (p - 1.0)) * (1 + rtol)),
        lf_bound_ok=bool(lf_ok),
        lower_gap=dn.value - cp * tr.value ** (p / (1.0 - p)),
        lower_gap_homogeneity=dn.value - cp ** (p - 1.0) * tr.value ** (-p),
        roundtrip_err=max(rt.dirichlet_error, rt.neumann_error),
        witnesses={"tr": tr.witness, "ext": ext.witness, "dtn": dn.witness, "ntd": nn.witness},
    )
