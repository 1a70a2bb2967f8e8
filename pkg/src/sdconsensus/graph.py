"""Communication topology: adjacency, degree-normalized weights, spectrum, modal transform.

The neighbor-averaging matrix ``W = inv(D) @ A`` (row stochastic) is similar to
the symmetric ``N = D^-1/2 @ A @ D^-1/2``, so its spectrum is real and lies in
[-1, 1]; for a connected graph the top eigenvalue 1 is simple and its
eigenvector is the all-ones vector.  ``spectrum`` diagonalizes N with the
Jacobi eigensolver and maps the basis back, rescaling the top column so the
modal matrix carries the exact all-ones consensus direction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sdpcore import jacobi_eigh


@dataclass(frozen=True, eq=False)
class Topology:
    """Undirected simple graph on nodes 1..n (stored 0-based internally)."""

    n: int
    adjacency: np.ndarray  # (n, n) symmetric 0/1, zero diagonal
    degrees: np.ndarray    # (n,) int


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigenvalues of the neighbor-averaging matrix, sorted descending, with
    the diagonalizing transform T (first column all ones) and its inverse."""

    eigenvalues: np.ndarray
    modal_matrix: np.ndarray
    modal_inverse: np.ndarray


def build_topology(n: int, edges) -> Topology:
    """Build a topology from 1-based edge pairs.

    Rejects self-loops, out-of-range indices and duplicate edges (either
    orientation), naming the offending pair.
    """
    n = int(n)
    if n < 2:
        raise ValueError(f"agent count must be >= 2, got {n}")
    adjacency = np.zeros((n, n))
    seen = set()
    for pair in edges:
        i, j = (int(pair[0]), int(pair[1]))
        if i == j:
            raise ValueError(f"self-loop ({i}, {j}) is not allowed")
        if not (1 <= i <= n and 1 <= j <= n):
            raise ValueError(f"edge ({i}, {j}) out of range 1..{n}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise ValueError(f"duplicate edge ({i}, {j})")
        seen.add(key)
        adjacency[i - 1, j - 1] = 1.0
        adjacency[j - 1, i - 1] = 1.0
    degrees = adjacency.sum(axis=1).astype(np.int64)
    return Topology(n=n, adjacency=adjacency, degrees=degrees)


def parse_edge_list(text: str):
    """Parse edge-list text, one 1-based ``i j`` pair per line.

    Blank lines and lines starting with ``#`` are skipped.
    """
    edges = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'i j', got {line!r}")
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise ValueError(f"line {lineno}: non-integer node index in {line!r}") from None
    return edges


def weighted_adjacency(topology: Topology) -> np.ndarray:
    """Row-stochastic neighbor-averaging matrix: entry (i, j) = 1/deg(i) on edges."""
    degrees = topology.degrees
    for i in range(topology.n):
        if degrees[i] < 1:
            raise ValueError(f"node {i + 1} is isolated (degree 0); weights undefined")
    return topology.adjacency / degrees[:, None].astype(float)


def is_connected(topology: Topology) -> bool:
    """Breadth-first search from node 1."""
    n = topology.n
    adjacency = topology.adjacency
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    frontier = [0]
    while frontier:
        nxt = []
        for i in frontier:
            for j in np.nonzero(adjacency[i] > 0.0)[0]:
                if not seen[j]:
                    seen[j] = True
                    nxt.append(int(j))
        frontier = nxt
    return bool(seen.all())


def _canonical_column(col: np.ndarray) -> np.ndarray:
    for x in col:
        if abs(x) > 1e-12:
            return col if x > 0.0 else -col
    return col


def spectrum(topology: Topology) -> Spectrum:
    """Eigen-structure of the neighbor-averaging matrix of a connected topology.

    Diagonalizes the symmetrized matrix ``N = D^-1/2 A D^-1/2`` (cyclic Jacobi),
    sorts eigenvalues descending (ties broken by ascending eigenvector
    lexicographic order), and returns ``T = D^-1/2 U`` with the top column
    rescaled to the exact all-ones vector and the inverse adjusted to match.
    """
    if not is_connected(topology):
        raise ValueError("graph is disconnected; spectrum requires a connected topology")
    d = topology.degrees.astype(float)
    inv_sqrt = 1.0 / np.sqrt(d)
    sym = topology.adjacency * inv_sqrt[:, None] * inv_sqrt[None, :]
    vals, vecs = jacobi_eigh(sym)

    cols = [_canonical_column(vecs[:, i].copy()) for i in range(topology.n)]
    order = sorted(range(topology.n), key=lambda i: (-vals[i], tuple(cols[i])))
    eigenvalues = np.array([vals[i] for i in order])
    u = np.column_stack([cols[i] for i in order])

    if abs(eigenvalues[0] - 1.0) > 1e-9:
        raise ValueError(
            f"leading eigenvalue {eigenvalues[0]!r} differs from 1; "
            "topology is not a valid connected graph"
        )
    eigenvalues[0] = 1.0

    modal = u * inv_sqrt[:, None]
    modal_inv = u.T * np.sqrt(d)[None, :]
    # the top eigenvector is proportional to the ones vector; pin it exactly
    scale = modal[0, 0]
    modal[:, 0] = 1.0
    modal_inv[0, :] *= scale
    return Spectrum(eigenvalues=eigenvalues, modal_matrix=modal, modal_inverse=modal_inv)
