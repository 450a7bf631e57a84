"""Ad-hoc network topologies and left-stochastic combination matrices."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

MAX_TOPOLOGY_ATTEMPTS = 10_000
PERRON_TOL = 1e-12
PERRON_MAX_ITERS = 100_000


class TopologyError(RuntimeError):
    pass


@dataclass(frozen=True)
class Topology:
    """Undirected graph with forced self-loops.

    ``neighbors[k]`` is a sorted tuple that always contains ``k``.
    """

    n_nodes: int
    neighbors: tuple[tuple[int, ...], ...]

    @classmethod
    def from_edges(cls, n_nodes: int, edges) -> "Topology":
        nbrs = [{k} for k in range(n_nodes)]
        for a, b in edges:
            nbrs[a].add(b)
            nbrs[b].add(a)
        return cls(n_nodes, tuple(tuple(sorted(s)) for s in nbrs))

    @classmethod
    def from_adjacency(cls, adj) -> "Topology":
        adj = np.asarray(adj)
        n = adj.shape[0]
        edges = [(a, b) for a in range(n) for b in range(a + 1, n) if adj[a, b] or adj[b, a]]
        return cls.from_edges(n, edges)

    def degree(self, k: int) -> int:
        """Neighborhood size |N_k|, self included."""
        return len(self.neighbors[k])

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n_nodes, self.n_nodes), dtype=bool)
        for k, nb in enumerate(self.neighbors):
            adj[k, list(nb)] = True
        return adj

    def is_connected(self) -> bool:
        return _reachable(self.adjacency(), 0).all()

    def format_adjacency(self) -> str:
        return "\n".join(f"{k}: " + " ".join(map(str, nb)) for k, nb in enumerate(self.neighbors))


@dataclass(frozen=True)
class CombinationMatrix:
    """Left-stochastic weights; ``a[l, k]`` scales what node k receives from l."""

    a: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"combination matrix must be square, got shape {a.shape}")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @property
    def n_nodes(self) -> int:
        return self.a.shape[0]

    def check(self, tol: float = 1e-12) -> None:
        """Raise ValueError unless columns sum to one and entries are valid."""
        a = self.a
        if (a < 0).any():
            raise ValueError("combination weights must be non-negative")
        if not (np.diag(a) > 0).all():
            raise ValueError("every node needs a positive self-weight a_kk")
        err = np.abs(a.sum(axis=0) - 1.0).max()
        if err > tol:
            raise ValueError(f"columns must sum to 1 (max deviation {err:.3g})")

    def matches(self, topology: Topology) -> bool:
        """True when the sparsity pattern is contained in the topology."""
        return not (self.a[~topology.adjacency()] != 0).any()


@dataclass(frozen=True)
class SpectralSummary:
    perron: np.ndarray
    second_magnitude: float
    is_primitive: bool
    is_doubly_stochastic: bool
    eigenvalues: np.ndarray  # magnitudes, descending

    @property
    def perron_norm_sq(self) -> float:
        return float(self.perron @ self.perron)


def _reachable(adj: np.ndarray, start: int) -> np.ndarray:
    seen = np.zeros(adj.shape[0], dtype=bool)
    seen[start] = True
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(adj[u]):
            if not seen[v]:
                seen[v] = True
                queue.append(v)
    return seen


def random_connected_topology(n: int, edge_prob: float, rng: np.random.Generator) -> Topology:
    """Erdos-Renyi graph on ``n`` nodes, redrawn until connected."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < edge_prob <= 1:
        raise ValueError("edge_prob must be in (0, 1]")
    iu, ju = np.triu_indices(n, k=1)
    for _ in range(MAX_TOPOLOGY_ATTEMPTS):
        keep = rng.random(iu.size) < edge_prob
        topo = Topology.from_edges(n, zip(iu[keep].tolist(), ju[keep].tolist()))
        if topo.is_connected():
            return topo
    raise TopologyError(
        f"no connected graph after {MAX_TOPOLOGY_ATTEMPTS} attempts "
        f"(edge_prob={edge_prob} too small for n={n})"
    )


def metropolis_weights(t: Topology) -> CombinationMatrix:
    """Symmetric, doubly-stochastic Metropolis rule."""
    n = t.n_nodes
    deg = np.array([t.degree(k) for k in range(n)], dtype=float)
    a = np.zeros((n, n))
    for k in range(n):
        for l in t.neighbors[k]:
            if l != k:
                a[l, k] = min(1.0 / deg[l], 1.0 / deg[k])
    for k in range(n):
        a[k, k] = 1.0 - sum(a[j, k] for j in t.neighbors[k] if j != k)
    return CombinationMatrix(a)


def uniform_weights(t: Topology) -> CombinationMatrix:
    """a_lk = 1/|N_k|; left-stochastic but generally not doubly stochastic."""
    n = t.n_nodes
    a = np.zeros((n, n))
    for k in range(n):
        a[list(t.neighbors[k]), k] = 1.0 / t.degree(k)
    return CombinationMatrix(a)


def _is_primitive(a: np.ndarray) -> bool:
    # strongly connected support plus at least one self-loop
    adj = a != 0
    strongly = _reachable(adj, 0).all() and _reachable(adj.T, 0).all()
    return bool(strongly and (np.diag(a) > 0).any())


def _perron_power(a: np.ndarray) -> np.ndarray | None:
    n = a.shape[0]
    p = np.full(n, 1.0 / n)
    for _ in range(PERRON_MAX_ITERS):
        q = a @ p
        q /= q.sum()
        if np.abs(q - p).max() < PERRON_TOL:
            return q
        p = q
    return None


def spectral_summary(c: CombinationMatrix) -> SpectralSummary:
    a = c.a
    n = a.shape[0]
    primitive = _is_primitive(a)
    p = _perron_power(a) if primitive else None
    if p is None:
        # periodic or slow chains: take the eigenvalue-1 eigenvector directly
        vals, vecs = np.linalg.eig(a)
        idx = int(np.argmin(np.abs(vals - 1.0)))
        p = np.real(vecs[:, idx])
        p = p / p.sum()
    mags = np.sort(np.abs(np.linalg.eigvals(a)))[::-1]
    second = float(mags[1]) if n > 1 else 0.0
    doubly = bool(np.abs(a.sum(axis=1) - 1.0).max() <= 1e-12)
    return SpectralSummary(
        perron=p,
        second_magnitude=second,
        is_primitive=primitive,
        is_doubly_stochastic=doubly,
        eigenvalues=mags,
    )


def build_combiner(kind: str, t: Topology) -> CombinationMatrix:
    if kind == "metropolis":
        return metropolis_weights(t)
    if kind == "uniform":
        return uniform_weights(t)
    raise ValueError(f"unknown combiner {kind!r}")
