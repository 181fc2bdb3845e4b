from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

DEFAULT_EPS = (1e-1, 1e-2, 1e-3, 1e-4, 1e-6, 1e-8)


@dataclass(frozen=True)
class SolverConfig:
    """Knobs shared by the solvers and the norm searches.

    ``eps_schedule`` is relative to the largest edge gradient of the
    starting point; a final stage always runs on the unregularized energy.
    ``restarts`` is the number of starts used by multi-start ascents.
    """

    p: float = 2.0
    eps_schedule: tuple[float, ...] = DEFAULT_EPS
    grad_tol: float = 1e-10
    max_iter: int = 200
    seed: int = 0
    restarts: int = 16
    ascent_iter: int = 150

    def __post_init__(self):
        if not 1.0 < self.p < np.inf:
            raise ValueError(f"p must lie in (1, inf), got {self.p}")
        eps = tuple(float(e) for e in self.eps_schedule)
        if eps:
            if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
                raise ValueError("eps_schedule must be positive and strictly decreasing")
            if eps[-1] > 1e-8:
                raise ValueError("eps_schedule must end at or below 1e-8")
        object.__setattr__(self, "eps_schedule", eps)
        if self.grad_tol <= 0 or self.max_iter < 1 or self.restarts < 1:
            raise ValueError("tolerances, iteration caps and restarts must be positive")

    def with_p(self, p: float) -> "SolverConfig":
        return replace(self, p=float(p))

    def rng(self, salt: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.seed, salt])
