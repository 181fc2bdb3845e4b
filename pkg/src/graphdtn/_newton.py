"""Damped Newton minimization of edge p-energies with a linear load.

Minimizes

    F(x) = (1/p) * sum_e c_e * |(A x)_e|^p - b . x

over the free coordinates of ``x`` (the others stay at their initial
values), optionally with a weighted-mean-zero pin on ``x``. The edge
function is regularized as ``(g^2 + eps^2)^(p/2) - eps^p`` along a
decreasing ``eps`` schedule and then polished on the exact energy.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import csgraph
from scipy.sparse import linalg as splinalg

DENSE_LIMIT = 800
# below this many matrix entries sparse bookkeeping costs more than dense products
DENSE_ENTRIES = 2_000_000
# a Newton correction this small relative to max|x| is below working precision
STEP_TOL = 16 * np.finfo(float).eps
# relative vertex-difference thresholds tried when contracting tied edges
TIE_RTOLS = (1e-13, 1e-11, 1e-9, 1e-7)
# contractions may expose further ties; each reduced solve may contract again
MERGE_DEPTH = 3
# p < 2 curvature is evaluated no closer to 0 than this fraction of the gradient scale
HESS_FLOOR = 1e-18


@dataclass
class NewtonInfo:
    iterations: int
    residual: float
    scale: float
    converged: bool
    energy: float


def _difference_rows(A):
    """``(i, j, w)`` with row e of ``A`` equal to ``w_e (e_j - e_i)``, or None."""
    coo = A.tocoo()
    m = A.shape[0]
    counts = np.bincount(coo.row, minlength=m)
    if m == 0 or np.any((counts != 2) & (counts != 0)):
        return None
    order = np.lexsort((coo.col, coo.row))
    cols = coo.col[order].reshape(-1, 2)
    vals = coo.data[order].reshape(-1, 2)
    if np.any(vals[:, 0] != -vals[:, 1]):
        return None
    i = np.zeros(m, dtype=np.intp)
    j = np.zeros(m, dtype=np.intp)
    w = np.zeros(m)
    rows = np.flatnonzero(counts == 2)
    i[rows], j[rows], w[rows] = cols[:, 0], cols[:, 1], vals[:, 1]
    return i, j, w


def flux(g, p, eps=0.0):
    """Derivative of ``(1/p) psi_eps(g)``; equals ``|g|^(p-2) g`` at eps = 0."""
    if eps == 0.0:
        if p == 2.0:
            return g.copy()
        a = np.abs(g)
        out = np.zeros_like(g)
        nz = a > 0
        out[nz] = a[nz] ** (p - 2.0) * g[nz]
        return out
    return (g * g + eps * eps) ** ((p - 2.0) / 2.0) * g


def dflux(g, p, eps=0.0, floor=0.0):
    if eps == 0.0:
        if p == 2.0:
            return np.ones_like(g)
        a = np.maximum(np.abs(g), floor)
        with np.errstate(divide="ignore"):
            out = (p - 1.0) * a ** (p - 2.0)
        return np.minimum(out, 1e300)
    s = g * g + eps * eps
    return s ** ((p - 4.0) / 2.0) * ((p - 1.0) * g * g + eps * eps)


def edge_energy(g, p, eps=0.0):
    """``(1/p) * psi_eps(g)`` elementwise."""
    if eps == 0.0:
        return np.abs(g) ** p / p
    return ((g * g + eps * eps) ** (p / 2.0) - eps ** p) / p


class EdgeEnergyProblem:
    """Data of one minimization; see the module docstring."""

    def __init__(self, A, c, p, b, free, pin=None):
        A = sparse.csr_matrix(A)
        self.c = np.asarray(c, dtype=float)
        self.p = float(p)
        self.b = np.asarray(b, dtype=float)
        self.free = np.asarray(free)
        self.dense = A.shape[0] * A.shape[1] <= DENSE_ENTRIES
        if self.dense:
            self.A = A.toarray()
            self.Af = self.A[:, self.free]
        else:
            self.A = A
            self.Af = A[:, self.free].tocsc()
        self.AfT = self.Af.T.copy() if self.dense else self.Af.T.tocsr()
        self.absAfT = abs(self.AfT)
        self.pin = None if pin is None else np.asarray(pin, dtype=float)[self.free]
        self.absA_rowsum = np.asarray(abs(A).sum(axis=1)).reshape(-1)
        self._pairs = _difference_rows(A)

    def apply(self, x):
        """``A @ x``; for difference rows computed as ``w * (x[j] - x[i])`` so
        that identical values give exactly 0 (a fused multiply-add in a
        matrix product does not)."""
        if self._pairs is None:
            return self.A @ x
        i, j, w = self._pairs
        return w * (x[j] - x[i])

    def objective(self, x, eps=0.0):
        g = self.apply(x)
        return float(self.c @ edge_energy(g, self.p, eps) - self.b @ x)

    def gradient(self, x, eps=0.0):
        g = self.apply(x)
        return self.AfT @ (self.c * flux(g, self.p, eps)) - self.b[self.free]

    def scale(self, x):
        """Size of the individual terms entering the gradient."""
        g = self.apply(x)
        terms = self.absAfT @ np.abs(self.c * flux(g, self.p))
        bf = np.abs(self.b[self.free])
        return float(max(terms.max(initial=0.0), bf.max(initial=0.0)))

    def noise(self, x):
        """Gradient error caused by last-bit rounding of ``x`` alone.

        Differences are only known to about ``4 * eps_mach * max|x|`` per
        unit coefficient; for p < 2 the flux turns that into an error of
        order ``delta^(p-1)``, which no solver can beat.
        """
        g = np.abs(self.apply(x))
        rows = self.absA_rowsum
        delta = 4.0 * np.finfo(float).eps * float(np.abs(x).max(initial=0.0)) * rows
        dflx = flux(g + delta, self.p) - flux(g, self.p)
        return self.absAfT @ (self.c * dflx)

    def recenter(self, x):
        if self.pin is None:
            return x
        xf = x[self.free]
        x = x.copy()
        x[self.free] = xf - (self.pin @ xf) / self.pin.sum()
        return x

    def newton_step(self, x, r, eps, floor):
        g = self.apply(x)
        w = self.c * dflux(g, self.p, eps, floor)
        if self.dense:
            H = (self.AfT * w) @ self.Af
        else:
            H = self.AfT @ sparse.diags(w) @ self.Af
        return self._solve(H, r, self.pin)

    def _solve(self, H, r, pin):
        nf = H.shape[0]
        if nf <= DENSE_LIMIT:
            if sparse.issparse(H):
                H = H.toarray()
            if pin is not None:
                q = pin / np.linalg.norm(pin)
                H = H + np.mean(np.diag(H)) * np.outer(q, q)
            try:
                return linalg.cho_solve(linalg.cho_factor(H, check_finite=False), -r)
            except linalg.LinAlgError:
                return linalg.lstsq(H, -r)[0]
        if pin is not None:
            q = pin / np.linalg.norm(pin)
            aug = sparse.bmat([[H, q[:, None]], [q[None, :], None]], format="csc")
            return splinalg.spsolve(aug, np.concatenate([-r, [0.0]]))[:nf]
        return splinalg.spsolve(sparse.csc_matrix(H), -r)


def minimize(problem: EdgeEnergyProblem, x0, eps_schedule=(), grad_tol=1e-10,
             max_iter=200, stage_iter=60, merge_ties=MERGE_DEPTH) -> tuple[np.ndarray, NewtonInfo]:
    """Run continuation over ``eps_schedule`` (relative to the gradient
    scale of ``x0``) and a final exact stage. Convergence is judged on the
    exact gradient: ``|grad| <= grad_tol * scale`` componentwise, up to the
    rounding floor of :meth:`EdgeEnergyProblem.noise`. A point whose Newton
    correction is below the rounding level of ``x`` also counts as
    converged: for p < 2 near-vanishing differences make the flux so steep
    that the residual cannot be pushed further in floating point."""
    x = problem.recenter(np.array(x0, dtype=float))
    p = problem.p
    gscale = float(np.abs(problem.apply(x)).max(initial=0.0))
    if gscale == 0.0:
        gscale = 1.0
    stages = [] if p == 2.0 else [e * gscale for e in eps_schedule]
    stages.append(0.0)
    floor = HESS_FLOOR * gscale
    total = 0
    resolved = False
    for eps in stages:
        final = eps == 0.0
        cap = max_iter if final else stage_iter
        for _ in range(cap):
            r = problem.gradient(x, eps)
            scale = problem.scale(x)
            res = np.abs(r).max(initial=0.0)
            if final:
                done = _converged(problem, x, grad_tol)
            else:
                done = res <= max(grad_tol, 1e-6) * scale
            if done or scale == 0.0:
                break
            s = problem.newton_step(x, r, eps, floor)
            if final and np.abs(s).max(initial=0.0) <= STEP_TOL * np.abs(x).max(initial=0.0):
                resolved = True
                break
            xs = np.zeros_like(x)
            xs[problem.free] = s
            x_new = _line_search(problem, x, xs, r @ s, eps, res)
            if x_new is None:
                break
            x = problem.recenter(x_new)
            total += 1
    ok = resolved or _converged(problem, x, grad_tol) or problem.scale(x) == 0.0
    rtols = ()
    if merge_ties and p < 2.0 and not _converged(problem, x, grad_tol, strict=True):
        # passing only by the rounding allowance (or failing) can mean exact ties
        rtols = TIE_RTOLS
    elif merge_ties and p > 2.0:
        # the flux of a tie vanishes like |g|^(p-1), so the residual test
        # only places it to about grad_tol^(1/(p-1))
        rtols = TIE_RTOLS + (min(1e-3, 10.0 * grad_tol ** (1.0 / (p - 1.0))),)
    for rtol in rtols:
        merged = _solve_tied(problem, x, rtol, grad_tol, max_iter, merge_ties - 1)
        if merged is None:
            continue
        y, extra = merged
        total += extra
        y_ok = _converged(problem, y, grad_tol)
        # keep a contraction that converges, or that at least lowers the residual
        if (y_ok or not ok) and (y_ok > ok or _residual(problem, y) < _residual(problem, x)):
            x, ok = y, y_ok
        if p < 2.0 and _converged(problem, x, grad_tol, strict=True):
            break
    r = problem.gradient(x)
    scale = problem.scale(x)
    res = float(np.abs(r).max(initial=0.0))
    return x, NewtonInfo(total, res, scale, bool(ok), problem.objective(x))


def _solve_tied(problem, x, rtol, grad_tol, max_iter, depth):
    """Re-solve with near-tied edges contracted into single unknowns;
    ``None`` when there is nothing to contract.

    For p < 2 an edge whose optimal difference is exactly 0 carries a flux
    of order ``ulp^(p-1)`` at any floating-point neighbor, so only making
    the two values identical can certify the solution.
    """
    n = len(x)
    A = sparse.csr_matrix(problem.A)
    free = problem.free
    width = problem.absA_rowsum / 2.0
    diff = np.abs(problem.apply(x)) / np.where(width > 0, width, 1.0)
    tied = np.flatnonzero((diff <= rtol * np.abs(x).max(initial=0.0)) & (width > 0))
    if len(tied) == 0:
        return None
    # every row is a difference of two coordinates
    ends = A[tied].tocoo()
    order = np.lexsort((ends.col, ends.row))
    cols = ends.col[order].reshape(-1, 2)
    link = sparse.coo_matrix((np.ones(len(tied)), (cols[:, 0], cols[:, 1])), shape=(n, n))
    ncomp, label = csgraph.connected_components(link, directed=False)
    # a cluster containing fixed coordinates takes their common value
    value = np.full(ncomp, np.nan)
    is_free = np.zeros(n, dtype=bool)
    is_free[free] = True
    for k in np.flatnonzero(~is_free):
        c = label[k]
        if np.isnan(value[c]):
            value[c] = x[k]
        elif value[c] != x[k]:
            return None
    lab = label[free]
    snap = ~np.isnan(value[lab])
    moving = free[~snap]
    comps, col = np.unique(lab[~snap], return_inverse=True)
    P = sparse.csr_matrix((np.ones(len(moving)), (np.arange(len(moving)), col)),
                          shape=(len(moving), len(comps)))
    held = x.copy()
    held[free[snap]] = value[lab[snap]]
    held[moving] = 0.0
    # variables: all n coordinates (held constant) followed by one per cluster
    keep = np.ones(n)
    keep[moving] = 0.0
    Ared = sparse.hstack([A @ sparse.diags(keep), A[:, moving] @ P]).tocsr()
    Ared.eliminate_zeros()
    bred = np.concatenate([np.zeros(n), P.T @ problem.b[moving]])
    pin = None
    if problem.pin is not None:
        pin_full = np.zeros(n)
        pin_full[free] = problem.pin
        pin = np.concatenate([np.zeros(n), P.T @ pin_full[moving]])
    sub = EdgeEnergyProblem(Ared, problem.c, problem.p, bred, n + np.arange(len(comps)), pin)
    z0 = (P.T @ x[moving]) / np.asarray(P.sum(axis=0)).reshape(-1)
    y, info = minimize(sub, np.concatenate([held, z0]), (), grad_tol, max_iter, merge_ties=depth)
    out = held
    out[moving] = P @ y[n:]
    return problem.recenter(out), info.iterations


def _converged(problem, x, grad_tol, strict=False):
    r = np.abs(problem.gradient(x))
    bound = grad_tol * problem.scale(x)
    if not strict:
        bound = bound + problem.noise(x)
    return bool(np.all(r <= bound))


def _residual(problem, x):
    return float(np.abs(problem.gradient(x)).max(initial=0.0))


def _line_search(problem, x, step, slope, eps, res):
    f0 = problem.objective(x, eps)
    # predicted decrease below rounding of f: Armijo comparisons are noise
    if abs(slope) > 1e-13 * max(1.0, abs(f0)):
        t = 1.0
        for _ in range(40):
            xt = x + t * step
            ft = problem.objective(xt, eps)
            if ft <= f0 + 1e-4 * t * slope:
                return xt
            t *= 0.5
    # otherwise take the trial step with the smallest residual
    best, best_x = res, None
    t = 1.0
    for _ in range(24):
        xt = x + t * step
        rt = np.abs(problem.gradient(xt, eps)).max(initial=0.0)
        if rt < best:
            best, best_x = rt, xt
        t *= 0.5
    return best_x
