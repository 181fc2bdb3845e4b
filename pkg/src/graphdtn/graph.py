"""Finite weighted graphs viewed as discrete metric measure spaces.

A :class:`MetricMeasureGraph` carries an interior/boundary vertex split,
edge lengths (which induce the shortest-path metric), an edge measure used
by gradient energies, an interior vertex measure ``mu`` used for L^p norms
and means, and a boundary vertex measure ``nu``.

Vertex functions are plain ``numpy`` arrays in vertex order; boundary
functions are arrays ordered like ``graph.boundary``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph


class GraphError(ValueError):
    """Raised when a graph cannot be built or fails its invariants."""


@dataclass(frozen=True)
class BesovParams:
    """Exponent ``p`` with the smoothness ``theta = 1 - Theta / p``.

    Build with :meth:`from_theta` or :meth:`from_Theta`; exactly one of the
    pair is an input, the other is derived.
    """

    p: float
    theta: float
    Theta: float

    @classmethod
    def from_theta(cls, p: float, theta: float) -> "BesovParams":
        return cls._checked(p, theta, p * (1.0 - theta))

    @classmethod
    def from_Theta(cls, p: float, Theta: float) -> "BesovParams":
        return cls._checked(p, 1.0 - Theta / p, Theta)

    @classmethod
    def from_any(cls, p: float, theta: float | None = None,
                 Theta: float | None = None) -> "BesovParams":
        if (theta is None) == (Theta is None):
            raise GraphError("give exactly one of theta and Theta")
        if theta is not None:
            return cls.from_theta(p, theta)
        return cls.from_Theta(p, Theta)

    @classmethod
    def _checked(cls, p, theta, Theta):
        p, theta, Theta = float(p), float(theta), float(Theta)
        if not 1.0 < p < np.inf:
            raise GraphError(f"p must lie in (1, inf), got {p}")
        if not 0.0 < theta < 1.0:
            raise GraphError(f"theta must lie in (0, 1), got {theta}")
        if not 0.0 < Theta < p:
            raise GraphError(f"Theta must lie in (0, p), got {Theta}")
        return cls(p, theta, Theta)


@dataclass
class ValidationReport:
    ok: bool
    problems: list[str] = field(default_factory=list)

    def raise_if_failed(self) -> None:
        if not self.ok:
            raise GraphError("; ".join(self.problems))


class MetricMeasureGraph:
    """Weighted graph with a boundary.

    Parameters
    ----------
    ids : sequence of str
        Vertex identifiers, in the order used by every vertex array.
    boundary : sequence of bool
        ``True`` for boundary vertices.
    mu : sequence of float
        Interior vertex measure. Entries at boundary vertices are ignored
        and stored as 0 (``mu`` does not charge the boundary).
    nu : sequence of float
        Boundary vertex measure. Entries at interior vertices are ignored
        and stored as 0.
    edges : sequence of (str, str)
        Edge endpoints by id.
    lengths, edge_mu : sequence of float
        Edge lengths and edge measures.
    pos : optional (n, 2) array
        Coordinates, only used by generators and plot data.

    The constructor only resolves structure; call :func:`validate` to check
    the invariants (positivity, connectivity and so on).
    """

    def __init__(self, ids: Sequence[str], boundary: Sequence[bool],
                 mu: Sequence[float], nu: Sequence[float],
                 edges: Sequence[tuple[str, str]], lengths: Sequence[float],
                 edge_mu: Sequence[float], pos=None):
        self.ids = [str(i) for i in ids]
        self.index = {}
        for k, vid in enumerate(self.ids):
            self.index.setdefault(vid, k)
        n = len(self.ids)
        self.is_boundary = np.asarray(boundary, dtype=bool).reshape(n)
        self.mu = np.where(self.is_boundary, 0.0, np.asarray(mu, dtype=float).reshape(n))
        self.nu = np.where(self.is_boundary, np.asarray(nu, dtype=float).reshape(n), 0.0)
        try:
            ends = [(self.index[a], self.index[b]) for a, b in edges]
        except KeyError as exc:
            raise GraphError(f"edge refers to unknown vertex id {exc.args[0]!r}") from None
        self.edges = np.asarray(ends, dtype=np.intp).reshape(-1, 2)
        self.lengths = np.asarray(lengths, dtype=float).reshape(-1)
        self.edge_mu = np.asarray(edge_mu, dtype=float).reshape(-1)
        if not (len(self.lengths) == len(self.edge_mu) == len(self.edges)):
            raise GraphError("edge arrays have inconsistent lengths")
        self.pos = None if pos is None else np.asarray(pos, dtype=float).reshape(n, 2)

    @classmethod
    def from_records(cls, vertices: Iterable[Mapping], edges: Iterable[Mapping]) -> "MetricMeasureGraph":
        """Build from dict records shaped like the JSON graph file."""
        vertices = list(vertices)
        edges = list(edges)
        pos = None
        if vertices and all("pos" in v for v in vertices):
            pos = [v["pos"] for v in vertices]
        return cls(
            ids=[v["id"] for v in vertices],
            boundary=[bool(v["boundary"]) for v in vertices],
            mu=[v.get("mu", 0.0) if not v["boundary"] else 0.0 for v in vertices],
            nu=[v.get("nu", 0.0) if v["boundary"] else 0.0 for v in vertices],
            edges=[(e["u"], e["v"]) for e in edges],
            lengths=[e["length"] for e in edges],
            edge_mu=[e["mu"] for e in edges],
            pos=pos,
        )

    def __repr__(self):
        return (f"MetricMeasureGraph(n={self.n}, interior={len(self.interior)}, "
                f"boundary={len(self.boundary)}, edges={self.m})")

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(~self.is_boundary)

    @cached_property
    def boundary(self) -> np.ndarray:
        return np.flatnonzero(self.is_boundary)

    @property
    def boundary_ids(self) -> list[str]:
        return [self.ids[k] for k in self.boundary]

    @property
    def nu_boundary(self) -> np.ndarray:
        return self.nu[self.boundary]

    @cached_property
    def gradient_matrix(self) -> sparse.csr_matrix:
        """Sparse (m, n) matrix with ``(D u)_e = (u[v] - u[u]) / length_e``."""
        m = self.m
        rows = np.repeat(np.arange(m), 2)
        cols = self.edges.reshape(-1)
        inv = 1.0 / self.lengths
        vals = np.column_stack([-inv, inv]).reshape(-1)
        return sparse.csr_matrix((vals, (rows, cols)), shape=(m, self.n))

    @cached_property
    def laplacian(self) -> sparse.csr_matrix:
        """Weighted Laplacian ``D^T diag(edge_mu) D``; the p = 2 energy form."""
        D = self.gradient_matrix
        return (D.T @ sparse.diags(self.edge_mu) @ D).tocsr()

    def adjacency(self) -> sparse.csr_matrix:
        i, j = self.edges.T
        w = np.concatenate([self.lengths, self.lengths])
        return sparse.csr_matrix((w, (np.concatenate([i, j]), np.concatenate([j, i]))),
                                 shape=(self.n, self.n))

    @cached_property
    def distances(self) -> np.ndarray:
        return shortest_path_distances(self)

    def vertex_function(self, values: Mapping[str, float]) -> np.ndarray:
        return self._gather(values, range(self.n))

    def boundary_function(self, values: Mapping[str, float]) -> np.ndarray:
        return self._gather(values, self.boundary)

    def _gather(self, values, where):
        out = np.empty(len(where))
        for k, v in enumerate(where):
            vid = self.ids[v]
            if vid not in values:
                raise GraphError(f"missing value for vertex {vid!r}")
            out[k] = float(values[vid])
        extra = set(values) - {self.ids[v] for v in where}
        if extra:
            raise GraphError(f"values given for unknown or non-applicable ids: {sorted(extra)}")
        return out

    def scaled(self, length_factor: float = 1.0, measure_factor: float = 1.0) -> "MetricMeasureGraph":
        """Copy with lengths and all measures multiplied by constants."""
        return MetricMeasureGraph(
            self.ids, self.is_boundary, self.mu * measure_factor, self.nu * measure_factor,
            [(self.ids[a], self.ids[b]) for a, b in self.edges],
            self.lengths * length_factor, self.edge_mu * measure_factor, self.pos)


def validate(graph: MetricMeasureGraph) -> ValidationReport:
    problems = []
    if len(set(graph.ids)) != len(graph.ids):
        problems.append("duplicate vertex id")
    if len(graph.interior) == 0:
        problems.append("empty interior")
    if len(graph.boundary) < 2:
        problems.append("fewer than two boundary vertices")
    if np.any(~np.isfinite(graph.lengths)) or np.any(graph.lengths <= 0):
        problems.append("nonpositive length")
    if np.any(~np.isfinite(graph.edge_mu)) or np.any(graph.edge_mu <= 0):
        problems.append("nonpositive edge measure")
    mu_i = graph.mu[graph.interior]
    if np.any(~np.isfinite(mu_i)) or np.any(mu_i <= 0):
        problems.append("nonpositive interior measure")
    nu_b = graph.nu[graph.boundary]
    if np.any(~np.isfinite(nu_b)) or np.any(nu_b <= 0):
        problems.append("nonpositive boundary measure")
    if graph.m:
        a, b = graph.edges.T
        if np.any(a == b):
            problems.append("self-loop")
        keys = np.sort(graph.edges, axis=1)
        if len(np.unique(keys, axis=0)) != len(keys):
            problems.append("duplicate edge")
    degree = np.bincount(graph.edges.reshape(-1), minlength=graph.n)
    lonely = [graph.ids[k] for k in graph.boundary if degree[k] == 0]
    if lonely:
        problems.append(f"boundary vertex without edges: {', '.join(lonely)}")
    if graph.n and csgraph.connected_components(graph.adjacency(), directed=False)[0] > 1:
        problems.append("disconnected graph")
    return ValidationReport(ok=not problems, problems=problems)


def shortest_path_distances(graph: MetricMeasureGraph) -> np.ndarray:
    """All-pairs shortest-path lengths under the edge lengths."""
    d = csgraph.shortest_path(graph.adjacency(), method="D", directed=False)
    if np.any(np.isinf(d)):
        raise GraphError("disconnected graph")
    # both directions are path lengths; summation order can differ by an ulp
    return np.minimum(d, d.T)


def ball_measure(graph: MetricMeasureGraph, center: str | int, r: float, which: str = "mu") -> float:
    """Measure of the closed ball ``{z : d(center, z) <= r}``.

    ``which="mu"`` sums interior vertex measures, ``which="nu"`` boundary
    vertex measures.
    """
    if isinstance(center, str):
        if center not in graph.index:
            raise GraphError(f"unknown vertex id {center!r}")
        c = graph.index[center]
    else:
        c = int(center)
        if not 0 <= c < graph.n:
            raise GraphError(f"vertex index {c} out of range")
    if r < 0:
        raise GraphError("radius must be nonnegative")
    # cumulative sums in distance order keep the result monotone in r
    return float(ball_table(graph, c, np.array([r]), which)[0])


def _measure(graph, which):
    if which == "mu":
        return graph.mu
    if which == "nu":
        return graph.nu
    raise GraphError(f"which must be 'mu' or 'nu', got {which!r}")


def ball_table(graph: MetricMeasureGraph, center: int, radii: np.ndarray, which: str) -> np.ndarray:
    """Vectorized :func:`ball_measure` for many radii around one center."""
    d = graph.distances[center]
    order = np.argsort(d, kind="stable")
    csum = np.concatenate([[0.0], np.cumsum(_measure(graph, which)[order])])
    radii = np.asarray(radii, dtype=float)
    # closed balls; slack absorbs rounding in summed path lengths
    slack = radii + 1e-12 * np.maximum(radii, 1.0)
    return csum[np.searchsorted(d[order], slack, side="right")]
