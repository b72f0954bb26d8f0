"""Coupling into and from the past.

Two samplers share the pattern of a reference chain run backward in
time driving random maps of a target chain:

- ``aldous_broder_tree``: exact rooted spanning trees from the
  first-visit edges of a backward random walk, a natively read-once
  procedure;
- ``read_once_ciaftp``: the general rejection construction for a
  composite-map process whose coalescence indicators are stationary but
  not independent, demonstrated on a bounded two-state toy pair.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import NamedTuple

from .errors import CapExceededError

DEFAULT_COVER_CAP = 10**7
DEFAULT_COMPOSITE_CAP = 10**6


# ---------------------------------------------------------------------
# Graphs and rooted trees.
# ---------------------------------------------------------------------


class Graph:
    """Finite simple undirected graph with 0-indexed vertices."""

    __slots__ = ("n_vertices", "edges", "adjacency")

    def __init__(self, n_vertices: int, edges):
        if n_vertices < 1:
            raise ValueError("graph needs at least one vertex")
        seen = set()
        clean = []
        for u, v in edges:
            if not (0 <= u < n_vertices and 0 <= v < n_vertices):
                raise ValueError(f"edge ({u}, {v}) out of vertex range")
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            clean.append(key)
        self.n_vertices = n_vertices
        self.edges = tuple(sorted(clean))
        adj: list[list[int]] = [[] for _ in range(n_vertices)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        self.adjacency = tuple(tuple(sorted(a)) for a in adj)

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def is_connected(self) -> bool:
        seen = {0}
        frontier = [0]
        while frontier:
            u = frontier.pop()
            for v in self.adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    frontier.append(v)
        return len(seen) == self.n_vertices

    @classmethod
    def path(cls, n: int) -> "Graph":
        if n < 1:
            raise ValueError("path graph needs at least one vertex")
        return cls(n, [(i, i + 1) for i in range(n - 1)])

    @classmethod
    def cycle(cls, n: int) -> "Graph":
        if n < 3:
            raise ValueError("cycle graph needs at least three vertices")
        return cls(n, [(i, (i + 1) % n) for i in range(n)])

    @classmethod
    def complete(cls, n: int) -> "Graph":
        if n < 1:
            raise ValueError("complete graph needs at least one vertex")
        return cls(n, list(itertools.combinations(range(n), 2)))

    @classmethod
    def from_edge_list(cls, text: str) -> "Graph":
        """Parse one "u v" pair per line, 0-indexed; blank lines skipped."""
        edges = []
        top = -1
        for lineno, line in enumerate(text.splitlines(), start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected 'u v', got {line!r}")
            u, v = int(parts[0]), int(parts[1])
            if u < 0 or v < 0:
                raise ValueError(f"line {lineno}: vertices must be >= 0")
            top = max(top, u, v)
            edges.append((u, v))
        if top < 0:
            raise ValueError("edge list is empty")
        return cls(top + 1, edges)


def graph_from_spec(spec: str) -> Graph:
    """Build a graph from a CLI-style descriptor.

    Accepts path:N, cycle:N, complete:N, or file:<edge list path>.
    """
    kind, sep, arg = spec.partition(":")
    if not sep:
        raise ValueError(f"graph spec {spec!r} needs the form kind:arg")
    if kind == "file":
        with open(arg, encoding="utf-8") as fh:
            return Graph.from_edge_list(fh.read())
    builders = {"path": Graph.path, "cycle": Graph.cycle, "complete": Graph.complete}
    if kind not in builders:
        raise ValueError(
            f"unknown graph kind {kind!r}; expected path, cycle, complete, or file"
        )
    return builders[kind](int(arg))


@dataclass(frozen=True)
class RootedTree:
    """Spanning tree as a parent vector oriented toward the root.

    parent[v] is the next vertex on the path from v to the root;
    parent[root] is -1.
    """

    root: int
    parent: tuple[int, ...]

    def key(self) -> tuple:
        return (self.root, self.parent)

    def tree_edges(self) -> frozenset:
        return frozenset(
            frozenset((v, p)) for v, p in enumerate(self.parent) if p >= 0
        )

    def validate(self, graph: Graph) -> bool:
        """Raise if the parent vector is not a rooted spanning tree of
        the graph; returns True so it can sit inside assertions."""
        n = graph.n_vertices
        if len(self.parent) != n:
            raise ValueError("parent vector length does not match graph")
        if not (0 <= self.root < n) or self.parent[self.root] != -1:
            raise ValueError("root must be a vertex with parent -1")
        edge_set = set(graph.edges)
        for v, p in enumerate(self.parent):
            if v == self.root:
                continue
            if not (0 <= p < n):
                raise ValueError(f"vertex {v} has no valid parent")
            if (min(v, p), max(v, p)) not in edge_set:
                raise ValueError(f"parent edge ({v}, {p}) is not a graph edge")
            # Walking parents must reach the root without looping.
            hops = 0
            cur = v
            while cur != self.root:
                cur = self.parent[cur]
                hops += 1
                if hops > n:
                    raise ValueError(f"parent pointers loop at vertex {v}")
        return True


def aldous_broder_tree(
    graph: Graph, stream, *, cover_cap: int = DEFAULT_COVER_CAP
) -> RootedTree:
    """Exact draw from the stationary law over rooted spanning trees.

    Runs the simple random walk backward in time from a degree-biased
    (stationary) start; each vertex's parent is written at its first
    visit and never overwritten, so the tree is complete when the walk
    has covered the graph.  The resulting pair is distributed with
    probability proportional to the root's degree, uniform over trees
    given the root.  The stream is consumed strictly forward.
    """
    n = graph.n_vertices
    if n == 1:
        return RootedTree(root=0, parent=(-1,))
    if not graph.edges:
        raise ValueError("graph with several vertices but no edges")
    # Stationary start: a uniformly random edge endpoint hits v with
    # probability deg(v) / 2m.
    endpoints = [u for e in graph.edges for u in e]
    start = endpoints[stream.uniform_int(len(endpoints))]
    parent = [-2] * n
    parent[start] = -1
    visited = 1
    current = start
    steps = 0
    while visited < n:
        if steps >= cover_cap:
            raise CapExceededError(
                f"walk did not cover the graph within {cover_cap} steps; "
                "the graph may be disconnected"
            )
        nbrs = graph.adjacency[current]
        nxt = nbrs[stream.uniform_int(len(nbrs))]
        if parent[nxt] == -2:
            parent[nxt] = current
            visited += 1
        current = nxt
        steps += 1
    return RootedTree(root=start, parent=tuple(parent))


def enumerate_rooted_spanning_trees(graph: Graph) -> dict:
    """Exact law over (root, parent vector) pairs by enumeration.

    Oracle for the sampler: lists all spanning trees via edge subsets
    and weights each root by its degree in the graph.  Only viable for
    small graphs.
    """
    n = graph.n_vertices
    if n == 1:
        return {(0, (-1,)): 1.0}
    trees = []
    for subset in itertools.combinations(graph.edges, n - 1):
        # Union-find acyclicity check; n-1 acyclic edges connect everything.
        find = list(range(n))

        def root_of(x):
            while find[x] != x:
                find[x] = find[find[x]]
                x = find[x]
            return x

        ok = True
        for u, v in subset:
            ru, rv = root_of(u), root_of(v)
            if ru == rv:
                ok = False
                break
            find[ru] = rv
        if ok:
            trees.append(subset)
    if not trees:
        raise ValueError("graph has no spanning tree (disconnected)")
    total_degree = 2 * len(graph.edges)
    law: dict = {}
    for subset in trees:
        adj: list[list[int]] = [[] for _ in range(n)]
        for u, v in subset:
            adj[u].append(v)
            adj[v].append(u)
        for root in range(n):
            parent = [-2] * n
            parent[root] = -1
            frontier = [root]
            while frontier:
                u = frontier.pop()
                for v in adj[u]:
                    if parent[v] == -2:
                        parent[v] = u
                        frontier.append(v)
            key = (root, tuple(parent))
            law[key] = graph.degree(root) / (total_degree * len(trees))
    return law


# ---------------------------------------------------------------------
# Read-once coupling into and from the past on a bounded toy pair.
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class TwoStateCompositeToy:
    """Coupled reference/target pair with a bounded coalescence gap.

    The reference chain alternates deterministically between phases 1
    and 2 and is started uniformly, so it is reversible and stationary.
    A composite map is coalescent exactly when its input phase is 1
    (marginally half of the time): it overwrites the target state with
    a fresh Bernoulli(nu_one) draw.  Non-coalescent composites flip the
    target state with probability flip.  Because coalescent composites
    alternate with non-coalescent ones, the gap between coalescent maps
    is at most 2, which keeps the rejection construction's running time
    finite.  Every composite consumes exactly one word either way.

    With always_coalescent set, every composite is coalescent and the
    measurement count is identically 1.
    """

    nu_one: float = 0.7
    flip: float = 0.4
    always_coalescent: bool = False

    def __post_init__(self):
        if not (0.0 < self.nu_one < 1.0 and 0.0 < self.flip < 1.0):
            raise ValueError("nu_one and flip must lie strictly in (0, 1)")

    def reference_random_state(self, stream) -> int:
        """Stationary draw for the reference chain: uniform on {1, 2}."""
        return 1 + stream.uniform_int(2)

    def initial_state(self, x: int) -> int:
        """Arbitrary target state compatible with the reference phase."""
        return 0

    def is_coalescent_phase(self, x: int) -> bool:
        return self.always_coalescent or x == 1

    def random_composite(self, stream, x: int, state: int):
        """Advance the pair one composite map.

        Returns (new reference phase, new target state, coalesced flag).
        """
        u = stream.uniform01()
        if self.is_coalescent_phase(x):
            state = 1 if u < self.nu_one else 0
            flag = True
        else:
            if u < self.flip:
                state = 1 - state
            flag = False
        return 3 - x, state, flag


class CiaftpRun(NamedTuple):
    state: int
    length: int
    attempts: int
    composites: int


def read_once_ciaftp_run(
    toy, stream, *, composite_cap: int = DEFAULT_COMPOSITE_CAP
) -> CiaftpRun:
    """Full rejection construction, keeping run diagnostics.

    First a measurement pass counts composite maps up to and including
    the first coalescent one.  Then blocks of exactly that length are
    generated from fresh randomness until one starts with a coalescent
    composite and continues without another; the surviving target state
    is an exact stationary draw.  The count's law matches the law of
    the gap between successive coalescent maps, which is what makes the
    conditioning correct.  No randomness is ever reused.
    """
    composites = 0

    def composite(x, state):
        nonlocal composites
        if composites >= composite_cap:
            raise CapExceededError(
                f"no accepted block within {composite_cap} composite maps; "
                "unbounded coalescence gaps make the expected time infinite"
            )
        composites += 1
        return toy.random_composite(stream, x, state)

    # Measurement pass.
    x = toy.reference_random_state(stream)
    state = toy.initial_state(x)
    count = 0
    while True:
        x, state, flag = composite(x, state)
        count += 1
        if flag:
            break

    # Rejection pass: accept a block whose first composite is coalescent
    # and whose remaining count-1 composites are not.
    attempts = 0
    while True:
        attempts += 1
        x = toy.reference_random_state(stream)
        state = toy.initial_state(x)
        x, state, flag = composite(x, state)
        if not flag:
            continue
        accepted = True
        for _ in range(count - 1):
            x, state, flag = composite(x, state)
            if flag:
                accepted = False
                break
        if accepted:
            return CiaftpRun(
                state=state, length=count, attempts=attempts, composites=composites
            )


def read_once_ciaftp(toy, stream, *, composite_cap: int = DEFAULT_COMPOSITE_CAP):
    """Exact stationary draw of the toy target chain (state only)."""
    return read_once_ciaftp_run(toy, stream, composite_cap=composite_cap).state


def measure_first_coalescence(toy, stream) -> int:
    """Composites up to and including the first coalescent one.

    Independent re-measurement of the gap law; the accepted block
    length of the full construction must match this shifted count in
    distribution.
    """
    x = toy.reference_random_state(stream)
    state = toy.initial_state(x)
    count = 0
    while True:
        x, state, flag = toy.random_composite(stream, x, state)
        count += 1
        if flag:
            break
        if count > 10**6:
            raise CapExceededError("no coalescent composite within 10^6 maps")
    return count


def toy_output_law(toy) -> dict[int, float]:
    """Exact output law of the construction by enumerating the toy.

    Walks every bounded randomness realization: the measurement phase
    fixes the block length from the starting phase alone (coalescence
    is deterministic in the phase), and accepted blocks start from the
    phases consistent with the required flag pattern.
    """
    # Length law from the measurement pass.
    length_law: dict[int, float] = {}
    for phase in (1, 2):
        x = phase
        count = 0
        while True:
            flag = toy.is_coalescent_phase(x)
            x = 3 - x
            count += 1
            if flag:
                break
            if count > 64:
                raise ValueError("toy has unbounded coalescence gaps")
        length_law[count] = length_law.get(count, 0.0) + 0.5
    law = {0: 0.0, 1: 0.0}
    for count, p_count in length_law.items():
        valid_starts = []
        for phase in (1, 2):
            x = phase
            ok = toy.is_coalescent_phase(x)
            x = 3 - x
            for _ in range(count - 1):
                if toy.is_coalescent_phase(x):
                    ok = False
                    break
                x = 3 - x
            if ok:
                valid_starts.append(phase)
        if not valid_starts:
            raise ValueError(f"no phase admits an accepted block of length {count}")
        # Conditioned on acceptance the start is uniform over the
        # consistent phases.
        for _ in valid_starts:
            weight = p_count / len(valid_starts)
            dist = {1: toy.nu_one, 0: 1.0 - toy.nu_one}
            for _ in range(count - 1):
                flipped = {
                    0: dist[0] * (1 - toy.flip) + dist[1] * toy.flip,
                    1: dist[1] * (1 - toy.flip) + dist[0] * toy.flip,
                }
                dist = flipped
            for s, p in dist.items():
                law[s] += weight * p
    return law


def toy_length_law(toy) -> dict[int, float]:
    """Exact law of the measurement count (block length)."""
    length_law: dict[int, float] = {}
    for phase in (1, 2):
        x = phase
        count = 0
        while True:
            flag = toy.is_coalescent_phase(x)
            x = 3 - x
            count += 1
            if flag:
                break
            if count > 64:
                raise ValueError("toy has unbounded coalescence gaps")
        length_law[count] = length_law.get(count, 0.0) + 0.5
    return length_law
