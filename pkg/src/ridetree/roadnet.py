"""Road network storage and shortest-distance queries.

Weights are integer deciseconds of travel time. Unreachable pairs report
``INF``, which fails every ``<=`` comparison against a finite budget.
"""

from __future__ import annotations

import heapq
import math
import random
import threading
from collections import OrderedDict
from pathlib import Path
from typing import Iterable, Sequence

INF = math.inf


class NetworkFormatError(ValueError):
    """Raised for malformed network files; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class RoadNetwork:
    """Immutable undirected weighted graph over dense vertex ids ``0..V-1``.

    Duplicate edges collapse to their minimum weight. ``coords`` optionally
    gives planar positions in meters, used by the spatial index.
    """

    def __init__(
        self,
        vertex_count: int,
        edges: Iterable[tuple[int, int, int]],
        coords: Sequence[tuple[float, float]] | None = None,
    ):
        if vertex_count <= 0:
            raise ValueError("vertex_count must be positive")
        best: dict[tuple[int, int], int] = {}
        for u, v, w in edges:
            if not (0 <= u < vertex_count and 0 <= v < vertex_count):
                raise ValueError(f"edge ({u},{v}) has vertex id out of range")
            if u == v:
                raise ValueError(f"self loop at vertex {u}")
            if not isinstance(w, int) or w <= 0:
                raise ValueError(f"edge ({u},{v}) weight must be a positive integer, got {w!r}")
            key = (u, v) if u < v else (v, u)
            if key not in best or w < best[key]:
                best[key] = w
        if coords is not None and len(coords) != vertex_count:
            raise ValueError("coords must have one entry per vertex")

        self.vertex_count = vertex_count
        self._edges = sorted((u, v, w) for (u, v), w in best.items())
        self.adjacency: list[list[tuple[int, int]]] = [[] for _ in range(vertex_count)]
        for u, v, w in self._edges:
            self.adjacency[u].append((v, w))
            self.adjacency[v].append((u, w))
        for nbrs in self.adjacency:
            nbrs.sort()
        self.coords = [(float(x), float(y)) for x, y in coords] if coords is not None else None

    @property
    def edges(self) -> list[tuple[int, int, int]]:
        return list(self._edges)

    @property
    def edge_count(self) -> int:
        return len(self._edges)

    def neighbors(self, u: int) -> list[tuple[int, int]]:
        return self.adjacency[u]

    def weight(self, u: int, v: int) -> int:
        for x, w in self.adjacency[u]:
            if x == v:
                return w
        raise KeyError(f"no edge ({u},{v})")

    def __repr__(self) -> str:
        return f"RoadNetwork(V={self.vertex_count}, E={self.edge_count})"


def parse_network(text: str) -> RoadNetwork:
    """Parse the plain-text network format.

    First line ``V E``, then ``E`` lines ``u v w``. An optional trailing
    ``coords`` line followed by ``V`` lines ``x y`` attaches positions.
    Blank lines and ``#`` comments are ignored.
    """
    rows: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            rows.append((lineno, body.split()))
    if not rows:
        raise NetworkFormatError("empty network file", 1)

    lineno, head = rows[0]
    if len(head) != 2:
        raise NetworkFormatError("header must be 'V E'", lineno)
    try:
        n, m = int(head[0]), int(head[1])
    except ValueError:
        raise NetworkFormatError("header counts must be integers", lineno) from None
    if n <= 0 or m < 0:
        raise NetworkFormatError("header counts out of range", lineno)
    if len(rows) < 1 + m:
        raise NetworkFormatError(f"expected {m} edge lines, found {len(rows) - 1}", rows[-1][0])

    edges = []
    for lineno, parts in rows[1 : 1 + m]:
        if len(parts) != 3:
            raise NetworkFormatError("edge line must be 'u v w'", lineno)
        try:
            u, v, w = (int(p) for p in parts)
        except ValueError:
            raise NetworkFormatError(f"non-integer field in {' '.join(parts)!r}", lineno) from None
        if w <= 0:
            raise NetworkFormatError(f"weight must be positive, got {w}", lineno)
        if not (0 <= u < n and 0 <= v < n):
            raise NetworkFormatError(f"vertex id out of range [0,{n})", lineno)
        if u == v:
            raise NetworkFormatError("self loop", lineno)
        edges.append((u, v, w))

    coords = None
    rest = rows[1 + m :]
    if rest:
        lineno, parts = rest[0]
        if parts != ["coords"]:
            raise NetworkFormatError("unexpected content after edge lines", lineno)
        if len(rest) - 1 != n:
            raise NetworkFormatError(f"expected {n} coordinate lines", lineno)
        coords = []
        for lineno, parts in rest[1:]:
            if len(parts) != 2:
                raise NetworkFormatError("coordinate line must be 'x y'", lineno)
            try:
                coords.append((float(parts[0]), float(parts[1])))
            except ValueError:
                raise NetworkFormatError("non-numeric coordinate", lineno) from None
    return RoadNetwork(n, edges, coords)


def load_network(source: str | Path) -> RoadNetwork:
    return parse_network(Path(source).read_text())


def format_network(net: RoadNetwork) -> str:
    lines = [f"{net.vertex_count} {net.edge_count}"]
    lines += [f"{u} {v} {w}" for u, v, w in net.edges]
    if net.coords is not None:
        lines.append("coords")
        lines += [f"{x:.3f} {y:.3f}" for x, y in net.coords]
    return "\n".join(lines) + "\n"


def write_network(net: RoadNetwork, path: str | Path) -> None:
    Path(path).write_text(format_network(net))


def grid_network(rows: int, cols: int, weight: int = 1, spacing: float | None = None) -> RoadNetwork:
    """Rectangular grid; vertex ``r*cols + c`` sits at ``(c*spacing, r*spacing)``.

    ``spacing`` defaults to ``weight`` so coordinates are in weight units.
    """
    if rows <= 0 or cols <= 0:
        raise ValueError("grid dimensions must be positive")
    spacing = float(weight if spacing is None else spacing)
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1, weight))
            if r + 1 < rows:
                edges.append((v, v + cols, weight))
    coords = [(c * spacing, r * spacing) for r in range(rows) for c in range(cols)]
    return RoadNetwork(rows * cols, edges, coords)


def random_network(n: int, extra_edges: int, seed: int, max_weight: int = 100) -> RoadNetwork:
    """Connected random graph: a random spanning tree plus ``extra_edges`` chords."""
    rng = random.Random(seed)
    order = list(range(n))
    rng.shuffle(order)
    edges = []
    for i in range(1, n):
        u, v = order[i], order[rng.randrange(i)]
        edges.append((u, v, rng.randint(1, max_weight)))
    for _ in range(extra_edges):
        u, v = rng.sample(range(n), 2)
        edges.append((u, v, rng.randint(1, max_weight)))
    return RoadNetwork(n, edges)


class LRUCache:
    """Bounded mapping evicting the least recently used entry."""

    def __init__(self, capacity: int):
        if capacity < 0:
            raise ValueError("capacity must be non-negative")
        self.capacity = capacity
        self._data: OrderedDict[int, object] = OrderedDict()
        self.hits = 0
        self.misses = 0

    def get(self, key: int, default=None):
        data = self._data
        if key in data:
            data.move_to_end(key)
            self.hits += 1
            return data[key]
        self.misses += 1
        return default

    def put(self, key: int, value) -> None:
        if self.capacity == 0:
            return
        data = self._data
        data[key] = value
        data.move_to_end(key)
        if len(data) > self.capacity:
            data.popitem(last=False)

    def peek(self, key: int):
        """Like :meth:`get` without touching hit counters; ``None`` when absent."""
        data = self._data
        if key in data:
            data.move_to_end(key)
            return data[key]
        return None

    def __contains__(self, key: int) -> bool:
        return key in self._data

    def __len__(self) -> int:
        return len(self._data)

    def clear(self) -> None:
        self._data.clear()


class _Frontier:
    """A paused Dijkstra search that can be resumed toward further targets."""

    __slots__ = ("dist", "pred", "best", "heap")

    def __init__(self, source: int):
        self.dist: dict[int, int] = {}
        self.pred: dict[int, int] = {}
        self.best: dict[int, int] = {source: 0}
        self.heap: list[tuple[int, int]] = [(0, source)]


class DistanceOracle:
    """Exact shortest distances and paths over a :class:`RoadNetwork`.

    Dijkstra with a binary heap, fronted by a distance cache and a smaller
    path cache, both keyed by ``id(s) * |V| + id(e)``. Searches pause once
    their target is settled and are kept in a bounded LRU, so a later query
    from the same source resumes instead of restarting. Edges are
    undirected, which lets a search from ``e`` answer ``(s, e)``; misses
    grow the search around ``e`` because targets are usually fixed waypoints
    queried from many nearby vehicle positions. A lock guards all caches so
    one oracle can be shared between threads.
    """

    def __init__(
        self,
        network: RoadNetwork,
        distance_capacity: int = 10_000_000,
        path_capacity: int = 10_000,
        cache: bool = True,
        search_capacity: int = 256,
    ):
        self.network = network
        self.distance_cache = LRUCache(distance_capacity if cache else 0)
        self.path_cache = LRUCache(path_capacity if cache else 0)
        self.frontiers = LRUCache(search_capacity if cache else 0)
        self.searches = 0
        self._lock = threading.RLock()

    def key(self, s: int, e: int) -> int:
        return s * self.network.vertex_count + e

    def _check(self, v: int) -> None:
        if not 0 <= v < self.network.vertex_count:
            raise IndexError(f"vertex {v} out of range")

    def distance(self, s: int, e: int) -> int | float:
        """Exact shortest distance; ``INF`` when ``e`` is unreachable."""
        if s == e:
            self._check(s)
            return 0
        n = self.network.vertex_count
        cache = self.distance_cache
        with self._lock:
            d = cache.peek(s * n + e)
            if d is None:
                d = cache.peek(e * n + s)
            if d is not None:
                cache.hits += 1
                return d
            cache.misses += 1
            self._check(s)
            self._check(e)
            fr = self.frontiers.peek(s)
            if fr is not None and e in fr.dist:
                d = fr.dist[e]
            else:
                fr = self._grow(e, s)
                d = fr.dist.get(s, INF)
            cache.put(s * n + e, d)
            return d

    __call__ = distance

    def path(self, s: int, e: int) -> list[int] | None:
        """Vertex sequence of a shortest path, or ``None`` when unreachable."""
        self._check(s)
        self._check(e)
        if s == e:
            return [s]
        key = self.key(s, e)
        with self._lock:
            cached = self.path_cache.get(key)
            if cached is not None:
                return list(cached)
            fr = self._grow(e, s)
            if s not in fr.dist:
                return None
            pred = fr.pred
            out = [s]
            while out[-1] != e:
                out.append(pred[out[-1]])
            self.path_cache.put(key, tuple(out))
            return out

    def _grow(self, source: int, target: int) -> _Frontier:
        """Run (or resume) the search from ``source`` until ``target`` is settled."""
        fr = self.frontiers.peek(source)
        if fr is None:
            fr = _Frontier(source)
            self.frontiers.put(source, fr)
        dist = fr.dist
        if target in dist:
            return fr
        self.searches += 1
        adj = self.network.adjacency
        pred, best, heap = fr.pred, fr.best, fr.heap
        pop, push = heapq.heappop, heapq.heappush
        while heap:
            d, u = pop(heap)
            if u in dist:
                continue
            dist[u] = d
            for v, w in adj[u]:
                nd = d + w
                if v not in dist and nd < best.get(v, INF):
                    best[v] = nd
                    pred[v] = u
                    push(heap, (nd, v))
            if u == target:
                break
        return fr

    def path_cost(self, path: Sequence[int]) -> int:
        net = self.network
        return sum(net.weight(a, b) for a, b in zip(path, path[1:]))
