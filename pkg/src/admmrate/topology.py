"""Agent clusters and the selection/averaging operators they induce.

A :class:`ComponentStructure` models ``n_agents`` agents grouped into
overlapping clusters of size at least two. Agent indices are 1-based in
every public interface; internals convert to 0-based positions. Rows of
the selection matrix are ordered cluster by cluster, ascending agent
index inside each cluster, so all derived matrices are bit-stable.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import NotConnectedError
from .linalg import kron

RGG_MAX_RETRIES = 100


@dataclass(frozen=True)
class ComponentStructure:
    """Agents 1..n_agents grouped into clusters, each of size >= 2."""

    n_agents: int
    dim: int
    components: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.n_agents < 2:
            raise ValueError("need at least two agents")
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if not self.components:
            raise ValueError("need at least one component")
        normalized = []
        for comp in self.components:
            members = tuple(sorted(int(n) for n in comp))
            if len(set(members)) != len(members):
                raise ValueError(f"duplicate agent in component {comp}")
            if len(members) < 2:
                raise ValueError(f"component {comp} has fewer than two agents")
            if members[0] < 1 or members[-1] > self.n_agents:
                raise ValueError(f"agent index out of range in component {comp}")
            normalized.append(members)
        object.__setattr__(self, "components", tuple(normalized))

    @property
    def n_components(self) -> int:
        return len(self.components)

    @cached_property
    def total_rows(self) -> int:
        """Total number of selection rows: sum of the cluster sizes."""
        return sum(len(c) for c in self.components)

    @cached_property
    def row_agents(self) -> tuple[int, ...]:
        """Agent (1-based) selected by each row of the selection matrix."""
        return tuple(n for comp in self.components for n in comp)

    @cached_property
    def component_slices(self) -> tuple[tuple[int, int], ...]:
        """Row range (start, stop) of each component block."""
        out, start = [], 0
        for comp in self.components:
            out.append((start, start + len(comp)))
            start += len(comp)
        return tuple(out)

    @cached_property
    def memberships(self) -> tuple[tuple[int, ...], ...]:
        """For each agent (index 0 = agent 1), the components it belongs to."""
        member = [[] for _ in range(self.n_agents)]
        for ell, comp in enumerate(self.components):
            for n in comp:
                member[n - 1].append(ell)
        return tuple(tuple(m) for m in member)

    @cached_property
    def agent_rows(self) -> tuple[tuple[int, ...], ...]:
        """For each agent, the selection rows that copy its estimate."""
        rows = [[] for _ in range(self.n_agents)]
        for r, n in enumerate(self.row_agents):
            rows[n - 1].append(r)
        return tuple(tuple(r) for r in rows)

    def is_edge_clustering(self) -> bool:
        return all(len(c) == 2 for c in self.components)


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of the coverage and connectivity checks."""

    covers_all_agents: bool
    component_graph_connected: bool
    missing_agents: tuple[int, ...]

    @property
    def valid(self) -> bool:
        return self.covers_all_agents and self.component_graph_connected


def component_graph(cs: ComponentStructure) -> tuple[tuple[int, int], ...]:
    """Edges of the cluster-overlap graph: {l, m} iff clusters l and m
    share an agent. Vertices are 1-based cluster indices."""
    sets = [set(comp) for comp in cs.components]
    edges = []
    for a in range(cs.n_components):
        for b in range(a + 1, cs.n_components):
            if sets[a] & sets[b]:
                edges.append((a + 1, b + 1))
    return tuple(edges)


def validate(cs: ComponentStructure) -> ValidationReport:
    """Check that the clusters cover every agent and overlap into one piece.

    The second check runs a breadth-first traversal of the cluster-overlap
    graph. Both properties must hold before the structure is used by the
    solver or the rate analysis.
    """
    covered = set()
    for comp in cs.components:
        covered.update(comp)
    missing = tuple(n for n in range(1, cs.n_agents + 1) if n not in covered)

    adj = [set() for _ in range(cs.n_components)]
    for a, b in component_graph(cs):
        adj[a - 1].add(b - 1)
        adj[b - 1].add(a - 1)
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    connected = len(seen) == cs.n_components

    return ValidationReport(
        covers_all_agents=not missing,
        component_graph_connected=connected,
        missing_agents=missing,
    )


def selection_matrix(cs: ComponentStructure) -> np.ndarray:
    """The stacked 0/1 selection matrix, one block of rows per cluster."""
    s = np.zeros((cs.total_rows, cs.n_agents))
    for r, n in enumerate(cs.row_agents):
        s[r, n - 1] = 1.0
    return s


def mixing_matrices(cs: ComponentStructure):
    """Build the lifting and averaging operators (M, Pi, P).

    Returns
    -------
    m : ndarray, shape (T*K, N*K)
        Selection matrix lifted to K-dimensional estimates.
    pi : ndarray, shape (T, T)
        Block-diagonal averaging projector, one (1/l) ones-block per cluster.
    p : ndarray, shape (T*K, T*K)
        ``pi`` lifted to K dimensions; orthogonal projector onto the
        per-cluster consensus subspaces.
    """
    k = cs.dim
    m = kron(selection_matrix(cs), np.eye(k))
    pi = np.zeros((cs.total_rows, cs.total_rows))
    for (start, stop), comp in zip(cs.component_slices, cs.components):
        pi[start:stop, start:stop] = 1.0 / len(comp)
    p = kron(pi, np.eye(k)) if k > 1 else pi.copy()
    return m, pi, p


def centralized(n_agents: int, dim: int = 1) -> ComponentStructure:
    """Single cluster holding every agent."""
    return ComponentStructure(n_agents, dim, (tuple(range(1, n_agents + 1)),))


def ring(n_agents: int, dim: int = 1) -> ComponentStructure:
    """Ring of two-agent clusters {l, l+1} plus the wrap-around {1, N}."""
    if n_agents < 3:
        raise ValueError("ring needs at least three agents")
    comps = [(ell, ell + 1) for ell in range(1, n_agents)]
    comps.append((1, n_agents))
    return ComponentStructure(n_agents, dim, tuple(comps))


def from_edges(edges, n_agents: int, dim: int = 1) -> ComponentStructure:
    """One two-agent cluster per edge of a simple graph.

    Edges are canonicalized to (low, high) and sorted, so the row order
    of the derived matrices does not depend on the input order.
    """
    canon = set()
    for edge in edges:
        a, b = (int(x) for x in edge)
        if a == b:
            raise ValueError(f"self loop on agent {a}")
        canon.add((min(a, b), max(a, b)))
    if not canon:
        raise ValueError("edge list is empty")
    return ComponentStructure(n_agents, dim, tuple(sorted(canon)))


@dataclass(frozen=True)
class RggSample:
    """A connected random geometric graph drawn on the unit square."""

    seed: int
    radius: float
    points: tuple[tuple[float, float], ...]
    edges: tuple[tuple[int, int], ...]

    def to_structure(self, dim: int = 1) -> ComponentStructure:
        return from_edges(self.edges, len(self.points), dim)


def _graph_connected(n: int, edges) -> bool:
    adj = [[] for _ in range(n)]
    for a, b in edges:
        adj[a - 1].append(b - 1)
        adj[b - 1].append(a - 1)
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return len(seen) == n


def random_geometric_graph(n_agents: int, radius: float, seed: int) -> RggSample:
    """Sample agent positions uniformly on the unit square and connect pairs
    within ``radius``.

    Disconnected draws are retried with the seed incremented, up to
    ``RGG_MAX_RETRIES`` attempts.

    Raises
    ------
    NotConnectedError
        If no connected sample is found within the retry budget.
    """
    if n_agents < 2:
        raise ValueError("need at least two agents")
    if not 0.0 < radius <= math.sqrt(2.0):
        raise ValueError("radius must lie in (0, sqrt(2)]")
    for attempt in range(RGG_MAX_RETRIES):
        used_seed = seed + attempt
        rng = np.random.default_rng(used_seed)
        pts = rng.random((n_agents, 2))
        edges = []
        for i in range(n_agents):
            for j in range(i + 1, n_agents):
                if math.dist(pts[i], pts[j]) <= radius:
                    edges.append((i + 1, j + 1))
        if edges and _graph_connected(n_agents, edges):
            return RggSample(
                seed=used_seed,
                radius=radius,
                points=tuple((float(x), float(y)) for x, y in pts),
                edges=tuple(edges),
            )
    raise NotConnectedError(
        f"no connected geometric graph with radius {radius} after "
        f"{RGG_MAX_RETRIES} seeds starting at {seed}"
    )


def structure_to_json(cs: ComponentStructure) -> dict:
    return {
        "n_agents": cs.n_agents,
        "dim": cs.dim,
        "components": [list(c) for c in cs.components],
    }


def structure_from_json(data: dict) -> ComponentStructure:
    return ComponentStructure(
        n_agents=int(data["n_agents"]),
        dim=int(data.get("dim", 1)),
        components=tuple(tuple(int(n) for n in comp) for comp in data["components"]),
    )


def rgg_to_json(sample: RggSample) -> dict:
    return {
        "seed": sample.seed,
        "radius": sample.radius,
        "points": [list(p) for p in sample.points],
        "edges": [list(e) for e in sample.edges],
    }


def rgg_from_json(data: dict) -> RggSample:
    return RggSample(
        seed=int(data["seed"]),
        radius=float(data["radius"]),
        points=tuple((float(x), float(y)) for x, y in data["points"]),
        edges=tuple((int(a), int(b)) for a, b in data["edges"]),
    )
