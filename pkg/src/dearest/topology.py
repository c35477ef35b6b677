"""Network topologies, graph Laplacians, and gossip matrices.

Agents sit on the vertices of an undirected connected graph and may only
exchange information along edges.  The mixing (gossip) matrix is built as
W = I - L/lambda1(L), where L is the combinatorial Laplacian and lambda1(L)
its largest eigenvalue.  The second-largest eigenvalue of W and the spectral
gap 1 - lambda2(W) govern how fast repeated gossip averages the network, so
they are computed once and cached on the matrix.

Eigenvalues are computed with a cyclic Jacobi sweep: the matrices here are
small, dense and symmetric, and Jacobi is deterministic and accurate enough
(absolute off-diagonal tolerance 1e-10) without pulling in a LAPACK
dependency for this one job.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Graph",
    "GossipMatrix",
    "TopologyError",
    "GossipMatrixError",
    "EigensolverError",
    "build_ring",
    "build_random",
    "build_complete",
    "read_graph_file",
    "write_graph_file",
    "laplacian",
    "gossip_from_laplacian",
    "gossip_from_matrix",
    "jacobi_eigenvalues",
    "spectral_gap",
]

SYMMETRY_TOL = 1e-12
ROW_SUM_TOL = 1e-10
JACOBI_TOL = 1e-10

_MAX_RESAMPLES = 1000


class TopologyError(ValueError):
    """Invalid graph parameters or an unusable (e.g. disconnected) graph."""


class GossipMatrixError(ValueError):
    """A matrix violates the gossip-matrix requirements."""


class EigensolverError(RuntimeError):
    """The Jacobi sweep limit was hit before reaching the target tolerance."""


def _canonical_edge(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


def _is_connected(m: int, edges: frozenset[tuple[int, int]]) -> bool:
    if m <= 1:
        return True
    adj: list[list[int]] = [[] for _ in range(m)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == m


@dataclass(frozen=True)
class Graph:
    """Undirected connected graph on agents 0..m-1.

    Edges are canonical (lo, hi) pairs.  Construction rejects self-loops,
    out-of-range endpoints, and disconnected graphs; every downstream
    algorithm assumes connectivity.
    """

    m: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self) -> None:
        if self.m < 1:
            raise TopologyError(f"agent count must be positive, got {self.m}")
        canon = set()
        for i, j in self.edges:
            if i == j:
                raise TopologyError(f"self-loop at agent {i}")
            if not (0 <= i < self.m and 0 <= j < self.m):
                raise TopologyError(f"edge ({i}, {j}) out of range for m={self.m}")
            canon.add(_canonical_edge(i, j))
        object.__setattr__(self, "edges", frozenset(canon))
        if not _is_connected(self.m, self.edges):
            raise TopologyError(f"graph on {self.m} agents is not connected")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.m, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.m, self.m))
        for i, j in self.edges:
            a[i, j] = 1.0
            a[j, i] = 1.0
        return a


def build_ring(m: int) -> Graph:
    """Cycle graph: agent i is connected to (i +/- 1) mod m.  Requires m >= 3."""
    if m < 3:
        raise TopologyError(f"ring needs at least 3 agents, got {m}")
    return Graph(m, frozenset(_canonical_edge(i, (i + 1) % m) for i in range(m)))


def build_complete(m: int) -> Graph:
    """Complete graph on m >= 2 agents."""
    if m < 2:
        raise TopologyError(f"complete graph needs at least 2 agents, got {m}")
    return Graph(m, frozenset((i, j) for i in range(m) for j in range(i + 1, m)))


def build_random(m: int, prob: float, seed: int) -> Graph:
    """Erdos-Renyi G(m, prob), resampled until connected.

    Each attempt draws every pair (i < j, fixed order) independently with the
    given probability from a generator seeded with ``seed + attempt``, so the
    result is deterministic for a given seed.  Rejection-resampling keeps n
    agents reachable from each other; it gives up after 1000 attempts.
    """
    if m < 2:
        raise TopologyError(f"random graph needs at least 2 agents, got {m}")
    if not 0.0 < prob <= 1.0:
        raise TopologyError(f"edge probability must be in (0, 1], got {prob}")
    for attempt in range(_MAX_RESAMPLES):
        rng = np.random.default_rng(seed + attempt)
        draws = rng.random(m * (m - 1) // 2)
        edges = set()
        k = 0
        for i in range(m):
            for j in range(i + 1, m):
                if draws[k] < prob:
                    edges.add((i, j))
                k += 1
        if _is_connected(m, frozenset(edges)):
            return Graph(m, frozenset(edges))
    raise TopologyError(
        f"no connected G({m}, {prob}) sample in {_MAX_RESAMPLES} attempts "
        f"starting from seed {seed}"
    )


def read_graph_file(path: str | Path) -> Graph:
    """Read a graph from text: header line ``m <count>``, then one ``i j`` edge per line.

    Indices are 0-based.  Blank lines and ``#`` comments are ignored.
    """
    lines = Path(path).read_text().splitlines()
    m: int | None = None
    edges = set()
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if m is None:
            if len(tokens) != 2 or tokens[0] != "m":
                raise TopologyError(f"{path}:{lineno}: expected header 'm <count>', got {raw!r}")
            try:
                m = int(tokens[1])
            except ValueError:
                raise TopologyError(f"{path}:{lineno}: agent count {tokens[1]!r} is not an integer") from None
            continue
        if len(tokens) != 2:
            raise TopologyError(f"{path}:{lineno}: expected an 'i j' edge, got {raw!r}")
        try:
            i, j = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise TopologyError(f"{path}:{lineno}: non-integer edge endpoint in {raw!r}") from None
        edges.add(_canonical_edge(i, j))
    if m is None:
        raise TopologyError(f"{path}: missing 'm <count>' header")
    return Graph(m, frozenset(edges))


def write_graph_file(g: Graph, path: str | Path) -> None:
    """Write a graph in the same text format ``read_graph_file`` accepts."""
    lines = [f"m {g.m}"]
    lines += [f"{i} {j}" for i, j in sorted(g.edges)]
    Path(path).write_text("\n".join(lines) + "\n")


def laplacian(g: Graph) -> np.ndarray:
    """Combinatorial Laplacian L = D - A.  Rows sum to zero."""
    a = g.adjacency()
    return np.diag(a.sum(axis=1)) - a


def jacobi_eigenvalues(a: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = 60) -> np.ndarray:
    """All eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi rotations.

    Sweeps rotate every (p, q) pair in a fixed order until the off-diagonal
    Frobenius norm drops below ``tol`` (absolute).  Raises EigensolverError
    with diagnostics if ``max_sweeps`` full sweeps are not enough.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise GossipMatrixError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] != 1 and np.max(np.abs(a - a.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(a))):
        raise GossipMatrixError("matrix is not symmetric")
    n = a.shape[0]
    if n == 1:
        return a.reshape(1).copy()
    a = 0.5 * (a + a.T)  # symmetrize any tolerated asymmetry before iterating
    # Unreachable absolute tolerances (huge matrix scale) fall back to the
    # float64-representable floor instead of spinning forever.
    eff_tol = max(tol, 64.0 * np.finfo(float).eps * np.linalg.norm(a))
    for _ in range(max_sweeps):
        off = math.sqrt(2.0) * np.linalg.norm(a[np.triu_indices(n, k=1)])
        if off <= eff_tol:
            return np.sort(np.diag(a))
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = 1.0 / (tau - math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                rot = np.array([[c, s], [-s, c]])
                a[[p, q], :] = rot.T @ a[[p, q], :]
                a[:, [p, q]] = a[:, [p, q]] @ rot
                a[p, q] = 0.0
                a[q, p] = 0.0
    final_off = math.sqrt(2.0) * np.linalg.norm(a[np.triu_indices(n, k=1)])
    raise EigensolverError(
        f"Jacobi did not reach off-diagonal norm {eff_tol:.3e} in {max_sweeps} sweeps "
        f"(n={n}, final off-diagonal norm {final_off:.3e})"
    )


@dataclass(frozen=True)
class GossipMatrix:
    """Symmetric mixing matrix with cached spectral quantities.

    ``lambda2`` is the second-largest eigenvalue and ``gap = 1 - lambda2``.
    Instances come from ``gossip_from_laplacian`` or ``gossip_from_matrix``,
    which enforce symmetry, unit row sums, the edge sparsity pattern, and a
    simple unit eigenvalue; the array is frozen read-only.
    """

    w: np.ndarray
    lambda2: float
    gap: float

    @property
    def m(self) -> int:
        return self.w.shape[0]


def _finish_gossip(w: np.ndarray, lambda2: float) -> GossipMatrix:
    # Rounding can leave lambda2 a hair outside [0, 1); clamp tiny values to
    # zero so downstream sqrt(1 - lambda2^2) never sees a negative.
    if abs(lambda2) < 1e-15:
        lambda2 = 0.0
    w = np.array(w, dtype=float)
    w.setflags(write=False)
    return GossipMatrix(w=w, lambda2=float(lambda2), gap=float(1.0 - lambda2))


def gossip_from_laplacian(lap: np.ndarray) -> GossipMatrix:
    """Build W = I - L/lambda1(L) from a connected-graph Laplacian.

    The Laplacian spectrum gives W's spectrum directly: eigenvalues of W are
    1 - mu/lambda1 for Laplacian eigenvalues mu, so they all lie in [0, 1]
    with 1 attained exactly once when the graph is connected.
    """
    lap = np.asarray(lap, dtype=float)
    if lap.ndim != 2 or lap.shape[0] != lap.shape[1]:
        raise GossipMatrixError(f"Laplacian must be square, got shape {lap.shape}")
    m = lap.shape[0]
    if m < 2:
        raise GossipMatrixError("a single-agent graph has no gossip matrix")
    if np.max(np.abs(lap - lap.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(lap))):
        raise GossipMatrixError("Laplacian is not symmetric")
    if np.max(np.abs(lap.sum(axis=1))) > ROW_SUM_TOL:
        raise GossipMatrixError("Laplacian rows must sum to zero")
    mu = jacobi_eigenvalues(lap)
    if abs(mu[0]) > 1e-8:
        raise GossipMatrixError(f"smallest Laplacian eigenvalue {mu[0]:.3e} is not ~0")
    if mu[1] <= 1e-12:
        raise GossipMatrixError("Laplacian has a repeated zero eigenvalue: graph is disconnected")
    lam1 = float(mu[-1])
    w = np.eye(m) - lap / lam1
    return _finish_gossip(w, 1.0 - mu[1] / lam1)


def gossip_from_matrix(w: np.ndarray, graph: Graph | None = None) -> GossipMatrix:
    """Validate a user-supplied mixing matrix (weighted entries allowed).

    Checks symmetry (1e-12 per entry), unit row sums (1e-10 per row), zeros
    off the edge set when a graph is given, a simple eigenvalue at 1, and all
    other eigenvalues inside (-1, 1).
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise GossipMatrixError(f"mixing matrix must be square, got shape {w.shape}")
    m = w.shape[0]
    if np.max(np.abs(w - w.T)) > SYMMETRY_TOL:
        raise GossipMatrixError("mixing matrix is not symmetric to 1e-12")
    rows = w.sum(axis=1)
    if np.max(np.abs(rows - 1.0)) > ROW_SUM_TOL:
        worst = int(np.argmax(np.abs(rows - 1.0)))
        raise GossipMatrixError(f"row {worst} sums to {rows[worst]!r}, expected 1")
    if graph is not None:
        if graph.m != m:
            raise GossipMatrixError(f"matrix is {m}x{m} but graph has {graph.m} agents")
        for i in range(m):
            for j in range(i + 1, m):
                if (i, j) not in graph.edges and w[i, j] != 0.0:
                    raise GossipMatrixError(f"nonzero weight {w[i, j]!r} on non-edge ({i}, {j})")
    ev = jacobi_eigenvalues(w)
    if abs(ev[-1] - 1.0) > 1e-8:
        raise GossipMatrixError(f"largest eigenvalue {ev[-1]!r} is not 1")
    if m >= 2 and ev[-2] >= 1.0 - 1e-12:
        raise GossipMatrixError("eigenvalue 1 is not simple: the graph is effectively disconnected")
    if ev[0] <= -1.0 + 1e-12:
        raise GossipMatrixError(f"smallest eigenvalue {ev[0]!r} is not inside (-1, 1)")
    return _finish_gossip(w, ev[-2] if m >= 2 else 0.0)


def spectral_gap(w: GossipMatrix | np.ndarray) -> tuple[float, float]:
    """Return (lambda2, 1 - lambda2) for a symmetric mixing matrix.

    Accepts either a validated GossipMatrix (cached values) or a raw symmetric
    array, for which the full Jacobi spectrum is computed.
    """
    if isinstance(w, GossipMatrix):
        return w.lambda2, w.gap
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise GossipMatrixError(f"expected a square matrix, got shape {w.shape}")
    if np.max(np.abs(w - w.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(w))):
        raise GossipMatrixError("matrix is not symmetric")
    ev = jacobi_eigenvalues(w)
    lam2 = float(ev[-2]) if w.shape[0] >= 2 else float(ev[-1])
    return lam2, 1.0 - lam2
