"""Interference graph over cells."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import DuplicateEdge, IndexOutOfRange, SelfLoop


class FeasibilityWarning(UserWarning):
    """Some cell has fewer channels than neighbors + 1."""


@dataclass(frozen=True)
class InterferenceGraph:
    n_cells: int
    edges: tuple[tuple[int, int], ...]
    neighbors: tuple[frozenset, ...] = field(repr=False)

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(n) for n in self.neighbors], dtype=int)

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max()) if self.n_cells else 0

    def are_neighbors(self, a: int, b: int) -> bool:
        return b in self.neighbors[a]

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.edges:
            return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
        arr = np.array(self.edges, dtype=int)
        return arr[:, 0], arr[:, 1]

    def one_based_edges(self) -> list[list[int]]:
        return [[a + 1, b + 1] for a, b in self.edges]


def build_graph(n_cells: int, edges: Iterable[tuple[int, int]], *, one_based: bool = False) -> InterferenceGraph:
    """Validate an undirected edge list and build adjacency sets.

    Edges are normalized to ``(min, max)`` and sorted; listing the same pair
    twice (in either orientation) is an error.
    """
    if n_cells < 1:
        raise IndexOutOfRange("graph needs at least one cell")
    offset = 1 if one_based else 0
    seen = set()
    adj = [set() for _ in range(n_cells)]
    for a, b in edges:
        a, b = int(a) - offset, int(b) - offset
        if not (0 <= a < n_cells and 0 <= b < n_cells):
            raise IndexOutOfRange(f"edge ({a + offset}, {b + offset}) outside {n_cells} cells")
        if a == b:
            raise SelfLoop(f"cell {a + offset} cannot interfere with itself")
        key = (min(a, b), max(a, b))
        if key in seen:
            raise DuplicateEdge(f"edge {key} listed twice")
        seen.add(key)
        adj[a].add(b)
        adj[b].add(a)
    return InterferenceGraph(n_cells, tuple(sorted(seen)), tuple(frozenset(s) for s in adj))


def complete_graph(n_cells: int) -> InterferenceGraph:
    return build_graph(n_cells, [(a, b) for a in range(n_cells) for b in range(a + 1, n_cells)])


def random_graph(n_cells: int, edge_prob: float, rng: np.random.Generator) -> InterferenceGraph:
    """Erdos-Renyi G(n, p) graph."""
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError("edge_prob must lie in [0, 1]")
    iu, ju = np.triu_indices(n_cells, k=1)
    keep = rng.random(iu.size) < edge_prob
    return build_graph(n_cells, zip(iu[keep].tolist(), ju[keep].tolist()))


def check_feasibility(graph: InterferenceGraph, n_channels: int, *, warn: bool = True) -> bool:
    """True iff every cell has at least ``degree + 1`` channels.

    The condition is sufficient, not necessary, for the allocation solver to
    finish; a violation only emits :class:`FeasibilityWarning`.
    """
    ok = n_channels >= graph.max_degree + 1
    if not ok and warn:
        warnings.warn(
            f"{n_channels} channels < max degree {graph.max_degree} + 1; allocation may deadlock",
            FeasibilityWarning,
            stacklevel=2,
        )
    return ok
