from __future__ import annotations

import numpy as np
import pytest

from graphdtn.generators import generate, letter_id
from graphdtn.graph import MetricMeasureGraph


def build(kind: str, size: int) -> MetricMeasureGraph:
    doc = generate(kind, size)
    return MetricMeasureGraph.from_records(doc["vertices"], doc["edges"])


def random_graph(rng: np.random.Generator, n: int, n_boundary: int | None = None,
                 extra_edges: int | None = None, unit: bool = False) -> MetricMeasureGraph:
    """Connected random graph: a random spanning tree plus extra chords."""
    if n_boundary is None:
        n_boundary = int(rng.integers(2, max(3, n // 2 + 1)))
    n_boundary = min(max(n_boundary, 2), n - 1)
    ids = [letter_id(k) for k in range(n)]
    order = rng.permutation(n)
    pairs = set()
    for k in range(1, n):
        a, b = int(order[k]), int(order[rng.integers(0, k)])
        pairs.add((min(a, b), max(a, b)))
    extra = int(rng.integers(0, n)) if extra_edges is None else extra_edges
    for _ in range(extra):
        a, b = rng.choice(n, 2, replace=False)
        pairs.add((int(min(a, b)), int(max(a, b))))
    pairs = sorted(pairs)
    is_b = np.zeros(n, dtype=bool)
    is_b[rng.choice(n, n_boundary, replace=False)] = True
    m = len(pairs)
    if unit:
        lengths, emu, mu, nu = np.ones(m), np.ones(m), np.ones(n), np.ones(n)
    else:
        lengths = rng.uniform(0.5, 2.0, m)
        emu = rng.uniform(0.5, 2.0, m)
        mu = rng.uniform(0.5, 2.0, n)
        nu = rng.uniform(0.5, 2.0, n)
    return MetricMeasureGraph(ids, is_b, mu, nu, [(ids[a], ids[b]) for a, b in pairs], lengths, emu)


@pytest.fixture
def p3() -> MetricMeasureGraph:
    return build("path", 3)


@pytest.fixture
def grid5() -> MetricMeasureGraph:
    return build("grid", 5)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
