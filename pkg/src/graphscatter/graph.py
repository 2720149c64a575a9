"""Graphs, lead attachments and the matrices derived from them.

Vertices are 1-based everywhere a user can see them (constructors, JSON,
CLI). Matrices are plain dense numpy arrays indexed from 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import permutations
from typing import Iterable, Sequence

import numpy as np


class ConfigurationError(ValueError):
    """Invalid graph, lead layout or parameter combination."""


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices ``1..n``.

    Edges are stored as sorted ``(i, j)`` tuples with ``i < j``.
    """

    n: int
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __init__(self, n: int, edges: Iterable[Sequence[int]] = ()):
        if int(n) != n or n < 1:
            raise ConfigurationError(f"vertex count must be a positive integer, got {n!r}")
        normalized = set()
        for edge in edges:
            if len(edge) != 2:
                raise ConfigurationError(f"edge {edge!r} must have exactly two endpoints")
            i, j = (int(x) for x in edge)
            if i == j:
                raise ConfigurationError(f"self-loop at vertex {i}")
            for x in (i, j):
                if not 1 <= x <= n:
                    raise ConfigurationError(f"edge {edge!r}: vertex {x} outside [1, {n}]")
            pair = (min(i, j), max(i, j))
            if pair in normalized:
                raise ConfigurationError(f"duplicate edge {pair}")
            normalized.add(pair)
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "edges", frozenset(normalized))

    @cached_property
    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for i, j in self.edges:
            a[i - 1, j - 1] = a[j - 1, i - 1] = 1.0
        return a

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def neighbors(self, vertex: int) -> list[int]:
        return [int(j) + 1 for j in np.flatnonzero(self.adjacency[vertex - 1])]

    def is_connected(self) -> bool:
        seen = {1}
        stack = [1]
        while stack:
            for w in self.neighbors(stack.pop()):
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.n

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


@dataclass(frozen=True)
class LeadConfig:
    """Ordered attachment vertices; lead ``l`` (1-based) sits on ``attachments[l-1]``."""

    attachments: tuple[int, ...]

    def __init__(self, attachments: Iterable[int]):
        att = tuple(int(v) for v in attachments)
        if not att:
            raise ConfigurationError("at least one lead is required")
        seen = set()
        for v in att:
            if v in seen:
                raise ConfigurationError(f"duplicate lead vertex {v}: at most one lead per vertex")
            seen.add(v)
        object.__setattr__(self, "attachments", att)

    def __len__(self) -> int:
        return len(self.attachments)

    def validate_for(self, g: Graph) -> None:
        for v in self.attachments:
            if not 1 <= v <= g.n:
                raise ConfigurationError(f"lead vertex {v} outside [1, {g.n}]")


@dataclass(frozen=True)
class EigenDecomposition:
    """Spectrum of the positive Laplacian ``D - A``.

    ``values`` ascending, ``vectors[:, i]`` the matching orthonormal eigenvector.
    """

    values: np.ndarray
    vectors: np.ndarray

    def residual(self, g: Graph) -> float:
        op = -laplacian(g)
        return float(np.linalg.norm(op @ self.vectors - self.vectors * self.values, 2))


def laplacian(g: Graph) -> np.ndarray:
    """Return ``A - D``, the (negative semidefinite) graph Laplacian."""
    return g.adjacency - np.diag(g.degrees)


def lead_matrix(g: Graph, leads: LeadConfig) -> np.ndarray:
    """Zero/one ``n x l`` matrix with ``W[i, l] = 1`` iff lead ``l`` attaches at ``i``."""
    leads.validate_for(g)
    w = np.zeros((g.n, len(leads)))
    for col, v in enumerate(leads.attachments):
        w[v - 1, col] = 1.0
    return w


def eigenpairs(g: Graph) -> EigenDecomposition:
    values, vectors = np.linalg.eigh(-laplacian(g))
    # eigh is ascending already; clamp the round-off below zero
    values = np.where(np.abs(values) < 1e-12 * max(1.0, values[-1]), 0.0, values)
    return EigenDecomposition(values=values, vectors=vectors)


def automorphisms(g: Graph, fixed: Iterable[int] = ()) -> list[dict[int, int]]:
    """All vertex permutations preserving ``g`` and fixing the given vertices.

    Brute force over permutations pruned by degree; intended for the small
    example graphs (n up to ~10).
    """
    fixed = set(fixed)
    deg = g.degrees
    verts = list(range(1, g.n + 1))
    free = [v for v in verts if v not in fixed]
    out = []
    for perm in permutations(free):
        mapping = {v: v for v in fixed}
        mapping.update(zip(free, perm))
        if any(deg[v - 1] != deg[mapping[v] - 1] for v in free):
            continue
        if all((min(mapping[i], mapping[j]), max(mapping[i], mapping[j])) in g.edges for i, j in g.edges):
            out.append(mapping)
    return out


# Example graphs -----------------------------------------------------------

def complete_graph(n: int) -> Graph:
    return Graph(n, [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)])


def path_graph(n: int) -> Graph:
    return Graph(n, [(i, i + 1) for i in range(1, n)])


def grid_graph(layout: Sequence[Sequence[int]]) -> Graph:
    """Rectangular lattice with the given vertex labelling (rows of labels)."""
    pos = {label: (r, c) for r, row in enumerate(layout) for c, label in enumerate(row)}
    n = len(pos)
    if sorted(pos) != list(range(1, n + 1)):
        raise ConfigurationError("grid layout must label vertices 1..n exactly once")
    edges = []
    for a, (r1, c1) in pos.items():
        for b, (r2, c2) in pos.items():
            if a < b and abs(r1 - r2) + abs(c1 - c2) == 1:
                edges.append((a, b))
    return Graph(n, edges)


# Reconstructed 3x3 grid: mirror symmetry fixes 1, 5, 8 and swaps 2-3, 4-6, 7-9.
GRID9_LAYOUT = ((2, 1, 3), (4, 5, 6), (7, 8, 9))


def grid9() -> Graph:
    return grid_graph(GRID9_LAYOUT)


def random_connected_graph(n: int, rng: np.random.Generator, extra_edge_prob: float = 0.3) -> Graph:
    """Random spanning tree plus independent extra edges."""
    order = rng.permutation(n) + 1
    edges = set()
    for idx in range(1, n):
        parent = order[rng.integers(0, idx)]
        child = order[idx]
        edges.add((min(parent, child), max(parent, child)))
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            if (i, j) not in edges and rng.random() < extra_edge_prob:
                edges.add((i, j))
    return Graph(n, edges)
