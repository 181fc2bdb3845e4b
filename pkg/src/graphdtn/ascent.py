"""Norm estimates: exact generalized eigenproblems and multi-start ascent."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import linalg, optimize

log = logging.getLogger(__name__)


@dataclass
class NormEstimate:
    """Result of a sup-of-ratio computation.

    ``certified`` is True when ``value`` is the exact supremum (p = 2
    eigenproblems). Otherwise ``value`` is the ratio attained by
    ``witness`` and hence only a lower bound for the supremum.
    """

    value: float
    witness: np.ndarray
    certified: bool
    method: str


def complement_basis(w: np.ndarray) -> np.ndarray:
    """Orthonormal basis of ``{x : w . x = 0}`` as columns."""
    return linalg.null_space(np.atleast_2d(np.asarray(w, dtype=float)))


def top_generalized_eig(A: np.ndarray, B: np.ndarray, Q: np.ndarray, smallest: bool = False):
    """Extreme eigenpair of ``A x = lam B x`` restricted to ``span(Q)``.

    ``B`` must be positive definite on the subspace. Returns ``(lam, x)``
    with ``x = Q y`` in the full coordinates.
    """
    a = Q.T @ A @ Q
    b = Q.T @ B @ Q
    a = 0.5 * (a + a.T)
    b = 0.5 * (b + b.T)
    vals, vecs = linalg.eigh(a, b)
    k = 0 if smallest else -1
    return float(vals[k]), Q @ vecs[:, k]


def multistart_maximize(fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
                        starts: Sequence[np.ndarray], maxiter: int = 200,
                        gtol: float = 1e-10) -> tuple[float, np.ndarray]:
    """Maximize ``fun`` (returning value and gradient) from several starts.

    Each start is polished with L-BFGS. Starts whose evaluation fails are
    skipped. Returns the best value and its argument; ties resolve to the
    earliest start so the result is deterministic.
    """
    def neg(x):
        v, g = fun(x)
        return -v, -g

    best_val, best_x = -np.inf, None
    for x0 in starts:
        try:
            v0, _ = fun(x0)
        except (ArithmeticError, ValueError, RuntimeError, linalg.LinAlgError) as exc:
            log.debug("start skipped: %s", exc)
            continue
        if not np.isfinite(v0):
            continue
        try:
            res = optimize.minimize(neg, x0, jac=True, method="L-BFGS-B",
                                    options={"maxiter": maxiter, "gtol": gtol, "ftol": 1e-15})
            x, v = res.x, -res.fun
        except (ArithmeticError, ValueError, RuntimeError, linalg.LinAlgError) as exc:
            log.debug("ascent aborted: %s", exc)
            x, v = x0, v0
        if not np.isfinite(v) or v < v0:
            x, v = x0, v0
        if v > best_val:
            best_val, best_x = v, np.array(x, dtype=float)
    if best_x is None:
        raise RuntimeError("every start of the ascent failed")
    return best_val, best_x


def random_starts(rng: np.random.Generator, dim: int, count: int) -> list[np.ndarray]:
    return [rng.standard_normal(dim) for _ in range(count)]
