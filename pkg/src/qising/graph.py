"""Finite graphs with frozen boundary spins, and rooted b-ary trees.

Free vertices carry a dynamical trajectory; frozen vertices carry a fixed one
and act on their neighbours exactly like an extra local field.  Tree
boundaries are frozen ghost children under the leaves, and a cavity field on
the root is a frozen ghost parent.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Hashable, Iterable, Mapping, Optional, Sequence, Tuple, Union

from .trajectory import ModelParams, PiecewiseField, Trajectory, assemble_field

__all__ = [
    "SiteGraph",
    "GHOST_PARENT",
    "build_tree",
    "path_graph",
    "cycle_graph",
    "edge_list_graph",
    "local_field",
    "uniform_config",
]

GHOST_PARENT = -1


@dataclass(frozen=True)
class SiteGraph:
    """Undirected graph with free and frozen vertices.

    ``adjacency`` maps every vertex to the tuple of its neighbours; ``frozen``
    maps each frozen vertex to its fixed trajectory.  ``depth`` is filled for
    trees (root has depth 0; ghosts are included).
    """

    vertices: Tuple[Hashable, ...]
    adjacency: Mapping[Hashable, Tuple[Hashable, ...]]
    frozen: Mapping[Hashable, Trajectory] = field(default_factory=dict)
    depth: Mapping[Hashable, int] = field(default_factory=dict)
    root: Optional[Hashable] = None

    def __post_init__(self):
        vs = set(self.vertices)
        for v, nbrs in self.adjacency.items():
            if v not in vs:
                raise ValueError(f"unknown vertex {v!r} in adjacency")
            for u in nbrs:
                if v not in self.adjacency.get(u, ()):
                    raise ValueError(f"adjacency not symmetric at ({v!r}, {u!r})")
        for v in self.frozen:
            if v not in vs:
                raise ValueError(f"frozen vertex {v!r} not in graph")
        betas = {t.beta for t in self.frozen.values()}
        if len(betas) > 1:
            raise ValueError("frozen trajectories must share beta")

    @property
    def free(self) -> Tuple[Hashable, ...]:
        return tuple(v for v in self.vertices if v not in self.frozen)

    def neighbors(self, v) -> Tuple[Hashable, ...]:
        return self.adjacency.get(v, ())

    def is_frozen(self, v) -> bool:
        return v in self.frozen

    def edges(self):
        """Each undirected edge once, as ``(u, v)`` in vertex-list order."""
        order = {v: i for i, v in enumerate(self.vertices)}
        out = []
        for u in self.vertices:
            for v in self.adjacency.get(u, ()):
                if order[u] < order[v]:
                    out.append((u, v))
        return out

    def with_frozen(self, extra: Mapping[Hashable, Trajectory]) -> "SiteGraph":
        """Same graph with additional (or replaced) frozen vertices."""
        fz = dict(self.frozen)
        fz.update(extra)
        return SiteGraph(self.vertices, self.adjacency, fz, self.depth, self.root)

    def subtree(self, v) -> Tuple[Hashable, ...]:
        """Free vertices at or below ``v`` (trees only)."""
        if not self.depth:
            raise ValueError("subtree requires a rooted tree")
        out, stack = [], [v]
        while stack:
            x = stack.pop()
            if x not in self.frozen:
                out.append(x)
            for y in self.adjacency.get(x, ()):
                if self.depth.get(y, -1) == self.depth[x] + 1:
                    stack.append(y)
        return tuple(sorted(out, key=lambda x: (self.depth[x], x)))


BoundaryKind = Union[str, Mapping[int, Trajectory], Sequence[Trajectory]]


def build_tree(b: int, depth: int, beta: float, boundary: BoundaryKind = "plus",
               root_field: Optional[Trajectory] = None) -> SiteGraph:
    """Rooted tree with ``depth + 1`` free levels and ``b`` children per vertex.

    Vertices are numbered in breadth-first (heap) order: the children of ``v``
    are ``b*v + 1 .. b*v + b``.  ``boundary`` is ``"plus"``, ``"minus"``,
    ``"none"`` (no ghost leaves) or a sequence/mapping giving one trajectory
    per ghost leaf in breadth-first order.  ``root_field`` adds a frozen
    ghost parent with index ``GHOST_PARENT``.
    """
    if b < 2 or int(b) != b:
        raise ValueError("b must be an integer >= 2")
    if depth < 0 or int(depth) != depth:
        raise ValueError("depth must be a nonnegative integer")
    n_free = (b ** (depth + 1) - 1) // (b - 1)
    n_ghost = b ** (depth + 1)
    adj: Dict[int, list] = {}
    dep: Dict[int, int] = {}
    verts = []

    def link(u, v):
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)

    level_start = 0
    for d in range(depth + 1):
        for v in range(level_start, level_start + b ** d):
            verts.append(v)
            dep[v] = d
        level_start += b ** d
    for v in range(n_free):
        adj.setdefault(v, [])
        if v > 0:
            link((v - 1) // b, v)
    frozen: Dict[int, Trajectory] = {}
    if not (isinstance(boundary, str) and boundary == "none"):
        if isinstance(boundary, str):
            if boundary not in ("plus", "minus"):
                raise ValueError(f"unknown boundary kind {boundary!r}")
            sign = 1 if boundary == "plus" else -1
            taus = [Trajectory.constant(sign, beta)] * n_ghost
        elif isinstance(boundary, Mapping):
            taus = [boundary[i] for i in range(n_ghost)]
        else:
            taus = list(boundary)
            if len(taus) != n_ghost:
                raise ValueError(f"need {n_ghost} boundary trajectories")
        for i in range(n_ghost):
            g = n_free + i
            verts.append(g)
            dep[g] = depth + 1
            frozen[g] = taus[i]
            link((g - 1) // b, g)
    if root_field is not None:
        verts.append(GHOST_PARENT)
        dep[GHOST_PARENT] = -1
        frozen[GHOST_PARENT] = root_field
        link(GHOST_PARENT, 0)
    adjacency = {v: tuple(ns) for v, ns in adj.items()}
    return SiteGraph(tuple(verts), adjacency, frozen, dep, root=0)


def _from_edges(n: int, edges: Iterable[Tuple[int, int]],
                frozen: Optional[Mapping[int, Trajectory]] = None) -> SiteGraph:
    adj: Dict[int, list] = {v: [] for v in range(n)}
    for u, v in edges:
        if u == v:
            raise ValueError("self-loops are not allowed")
        if v in adj[u]:
            continue
        adj[u].append(v)
        adj[v].append(u)
    return SiteGraph(tuple(range(n)), {v: tuple(a) for v, a in adj.items()},
                     dict(frozen or {}))


def path_graph(n: int, frozen=None) -> SiteGraph:
    return _from_edges(n, [(i, i + 1) for i in range(n - 1)], frozen)


def cycle_graph(n: int, frozen=None) -> SiteGraph:
    if n < 3:
        raise ValueError("a cycle needs at least 3 vertices")
    return _from_edges(n, [(i, (i + 1) % n) for i in range(n)], frozen)


def edge_list_graph(n: int, edges, frozen=None) -> SiteGraph:
    return _from_edges(n, edges, frozen)


def uniform_config(graph: SiteGraph, sign: int, beta: float) -> Dict[Hashable, Trajectory]:
    """Every free vertex constant ``sign``."""
    t = Trajectory.constant(sign, beta)
    return {v: t for v in graph.free}


def neighbor_trajectories(graph: SiteGraph, config: Mapping, x):
    out = []
    for y in graph.neighbors(x):
        out.append(graph.frozen[y] if y in graph.frozen else config[y])
    return out


def local_field(graph: SiteGraph, config: Mapping, x, params: ModelParams) -> PiecewiseField:
    """Base field plus the trajectories of all neighbours of ``x``."""
    if x in graph.frozen:
        raise ValueError(f"vertex {x!r} is frozen")
    return assemble_field(params, neighbor_trajectories(graph, config, x))
