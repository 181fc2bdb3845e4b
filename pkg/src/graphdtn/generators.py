"""Deterministic test domains: path, square grid, L-shape and Koch snowflake."""
from __future__ import annotations

import math
from string import ascii_lowercase

import numpy as np
from shapely.geometry import Point, Polygon
from shapely.prepared import prep

from .graph import GraphError

KINDS = ("path", "grid", "lshape", "snowflake")


def letter_id(k: int) -> str:
    """Spreadsheet-style names: a, b, ..., z, aa, ab, ..."""
    name = ""
    k += 1
    while k:
        k, r = divmod(k - 1, 26)
        name = ascii_lowercase[r] + name
    return name


def generate(kind: str, size: int, params: dict | None = None) -> dict:
    """Graph document (the JSON file schema) for a named domain family.

    ``size`` is the vertex count for ``path``, the side vertex count for
    ``grid`` and ``lshape``, and the Koch level for ``snowflake``.
    """
    params = dict(params or {"p": 2.0, "Theta": 1.0})
    if kind == "path":
        body = _path(size)
    elif kind == "grid":
        body = _lattice(size, lshape=False)
    elif kind == "lshape":
        body = _lattice(size, lshape=True)
    elif kind == "snowflake":
        body = _snowflake(size)
    else:
        raise GraphError(f"unknown generator {kind!r}; choose from {', '.join(KINDS)}")
    return {"params": params, **body}


def _vertex(vid, boundary, pos):
    v = {"id": vid, "boundary": boundary}
    v["nu" if boundary else "mu"] = 1.0
    v["pos"] = [float(pos[0]), float(pos[1])]
    return v


def _path(n):
    if n < 3:
        raise GraphError("path needs at least 3 vertices")
    verts = [_vertex(letter_id(k), k in (0, n - 1), (k, 0)) for k in range(n)]
    edges = [{"u": letter_id(k), "v": letter_id(k + 1), "length": 1.0, "mu": 1.0} for k in range(n - 1)]
    return {"vertices": verts, "edges": edges}


def _lattice(n, lshape):
    if n < (5 if lshape else 3):
        raise GraphError(f"{'lshape' if lshape else 'grid'} size too small")
    h = (n - 1) // 2

    def present(i, j):
        if not (0 <= i < n and 0 <= j < n):
            return False
        return not (lshape and i > h and j > h)

    nodes = [(i, j) for i in range(n) for j in range(n) if present(i, j)]
    verts = []
    for i, j in nodes:
        # boundary: some lattice neighbor, diagonals included, is missing
        full = all(present(i + a, j + b) for a in (-1, 0, 1) for b in (-1, 0, 1))
        verts.append(_vertex(f"{i}_{j}", not full, (j, i)))
    edges = []
    for i, j in nodes:
        for a, b in ((0, 1), (1, 0)):
            if present(i + a, j + b):
                edges.append({"u": f"{i}_{j}", "v": f"{i + a}_{j + b}", "length": 1.0, "mu": 1.0})
    return {"vertices": verts, "edges": edges}


# unit steps of the triangular lattice in skew coordinates, counterclockwise
_DIRS = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)]


def koch_polygon(level: int) -> list[tuple[int, int]]:
    """Vertices of the level-k Koch snowflake in skew lattice coordinates.

    Traversed clockwise with unit steps; the initial triangle has side 3^k.
    """
    moves = "F--F--F"
    for _ in range(level):
        moves = moves.replace("F", "F+F--F+F")
    pts = [(0, 0)]
    heading = 0
    for ch in moves:
        if ch == "F":
            da, db = _DIRS[heading]
            a, b = pts[-1]
            pts.append((a + da, b + db))
        elif ch == "+":
            heading = (heading + 1) % 6
        else:
            heading = (heading - 1) % 6
    assert pts[-1] == (0, 0)
    return pts[:-1]


def _cartesian(a, b):
    return (a + 0.5 * b, 0.5 * math.sqrt(3.0) * b)


def _snowflake(level):
    if not 1 <= level <= 5:
        raise GraphError("snowflake level must lie in 1..5")
    poly_pts = koch_polygon(level)
    poly = Polygon(poly_pts)
    inside = prep(poly)
    covers = poly.buffer(1e-9)
    boundary = set(poly_pts)
    amin = min(a for a, _ in poly_pts)
    amax = max(a for a, _ in poly_pts)
    bmin = min(b for _, b in poly_pts)
    bmax = max(b for _, b in poly_pts)
    interior = [(a, b) for b in range(bmin, bmax + 1) for a in range(amin - bmax, amax - bmin + 1)
                if (a, b) not in boundary and inside.contains(Point(a, b))]
    nodes = poly_pts + interior
    is_b = [True] * len(poly_pts) + [False] * len(interior)
    index = {q: k for k, q in enumerate(nodes)}
    ids = [f"z{k}" if b else f"x{k - len(poly_pts)}" for k, b in enumerate(is_b)]
    verts = [_vertex(ids[k], is_b[k], _cartesian(*q)) for k, q in enumerate(nodes)]
    edges = []
    for q in nodes:
        for da, db in _DIRS[:3]:
            r = (q[0] + da, q[1] + db)
            if r not in index:
                continue
            mid = Point(q[0] + da / 2, q[1] + db / 2)
            if not covers.contains(mid):
                continue
            pa, pb = np.array(_cartesian(*q)), np.array(_cartesian(*r))
            edges.append({"u": ids[index[q]], "v": ids[index[r]],
                          "length": round(float(np.linalg.norm(pb - pa)), 12), "mu": 1.0})
    return {"vertices": verts, "edges": edges}
