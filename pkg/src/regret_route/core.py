"""Metric instances, rooted paths, regret arithmetic, and edge coloring."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

INF = 1 << 60


class RegretRouteError(Exception):
    """Base class for all solver errors."""


class InvalidInstanceError(RegretRouteError):
    """Input metric is malformed (asymmetric, negative, non-integral, ...)."""


class MalformedPathError(RegretRouteError):
    """A node sequence does not form a valid rooted path."""


class InfeasibleError(RegretRouteError):
    """Requested parameters admit no feasible solution."""

    def __init__(self, message: str, nodes: Sequence[int] = ()):
        super().__init__(message)
        self.nodes = tuple(nodes)


class SolverError(RegretRouteError):
    """Internal failure that theory says should not happen; a bug signal."""


def _as_int(x) -> int:
    # Accept ints and integral numpy scalars / floats; reject anything else.
    if isinstance(x, bool):
        raise InvalidInstanceError("boolean distance entry")
    if isinstance(x, int):
        return x
    try:
        if float(x).is_integer():
            return int(x)
    except (TypeError, ValueError):
        pass
    raise InvalidInstanceError(f"non-integer distance entry {x!r}")


@dataclass(frozen=True, eq=False)
class Instance:
    """Complete integer metric on n nodes with a distinguished root.

    dist is symmetric, zero on the diagonal, and satisfies the triangle
    inequality. root_dist caches the root row: root_dist[v] is the shortest
    root-to-v distance, written D_v elsewhere.
    """

    n: int
    root: int
    dist: Tuple[Tuple[int, ...], ...]
    root_dist: Tuple[int, ...]
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_matrix(cls, dist, root: int = 0, meta: dict | None = None,
                    validate: bool = True) -> "Instance":
        rows = [tuple(_as_int(x) for x in row) for row in dist]
        n = len(rows)
        if any(len(r) != n for r in rows):
            raise InvalidInstanceError("distance matrix is not square")
        if not 0 <= root < n:
            raise InvalidInstanceError(f"root {root} out of range")
        if validate:
            _validate_metric(rows)
        return cls(n=n, root=root, dist=tuple(rows),
                   root_dist=tuple(rows[root]), meta=dict(meta or {}))

    @property
    def clients(self) -> Tuple[int, ...]:
        return tuple(v for v in range(self.n) if v != self.root)

    def to_dict(self) -> dict:
        return {"n": self.n, "root": self.root,
                "dist": [list(row) for row in self.dist], "meta": self.meta}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Instance":
        return cls.from_matrix(d["dist"], root=int(d.get("root", 0)),
                               meta=d.get("meta") or {})


def _validate_metric(rows: List[Tuple[int, ...]]) -> None:
    n = len(rows)
    for u in range(n):
        if rows[u][u] != 0:
            raise InvalidInstanceError(f"nonzero diagonal at node {u}")
        for v in range(u + 1, n):
            if rows[u][v] != rows[v][u]:
                raise InvalidInstanceError(f"asymmetric entry ({u},{v})")
            if rows[u][v] < 0:
                raise InvalidInstanceError(f"negative distance ({u},{v})")
    for w in range(n):
        rw = rows[w]
        for u in range(n):
            ru = rows[u]
            uw = ru[w]
            for v in range(u + 1, n):
                if ru[v] > uw + rw[v]:
                    raise InvalidInstanceError(
                        f"triangle inequality fails: d({u},{v}) > d({u},{w}) + d({w},{v})")


@dataclass(frozen=True, eq=False)
class RootedPath:
    """Simple path starting at the root, with cached cost and regret data.

    prefix_regret[i] is the regret of nodes[i]: cost of the prefix ending
    there minus D of that node. It is nonnegative and nondecreasing, and
    prefix_regret[-1] equals the path regret.
    """

    nodes: Tuple[int, ...]
    cost: int
    regret: int
    prefix_regret: Tuple[int, ...]
    node_set: frozenset = field(repr=False)

    @classmethod
    def build(cls, inst: Instance, nodes: Sequence[int]) -> "RootedPath":
        nodes = tuple(int(v) for v in nodes)
        if not nodes:
            raise MalformedPathError("empty node sequence")
        if nodes[0] != inst.root:
            raise MalformedPathError(f"path starts at {nodes[0]}, not the root")
        if any(not 0 <= v < inst.n for v in nodes):
            raise MalformedPathError("node id out of range")
        if len(set(nodes)) != len(nodes):
            raise MalformedPathError("repeated node in path")
        dist, D = inst.dist, inst.root_dist
        cost = 0
        prefix = [0]
        for u, v in zip(nodes, nodes[1:]):
            cost += dist[u][v]
            prefix.append(cost - D[v])
        assert all(p >= 0 for p in prefix) and \
            all(a <= b for a, b in zip(prefix, prefix[1:]))
        return cls(nodes=nodes, cost=cost, regret=prefix[-1],
                   prefix_regret=tuple(prefix), node_set=frozenset(nodes))

    @classmethod
    def trivial(cls, inst: Instance) -> "RootedPath":
        return cls.build(inst, (inst.root,))

    @property
    def end(self) -> int:
        return self.nodes[-1]

    @property
    def is_trivial(self) -> bool:
        return len(self.nodes) == 1

    def visit_cost(self, i: int, inst: Instance) -> int:
        """Distance travelled from the root to nodes[i] along the path."""
        return self.prefix_regret[i] + inst.root_dist[self.nodes[i]]


def regret_distance(inst: Instance, u: int, v: int) -> int:
    """Asymmetric regret length of edge (u, v): D_u + c_uv - D_v."""
    return inst.root_dist[u] + inst.dist[u][v] - inst.root_dist[v]


def path_regret(inst: Instance, path) -> int:
    """Regret of a rooted path, recomputed from its node sequence.

    Accepts a RootedPath or a raw node sequence; malformed sequences raise
    MalformedPathError. Equals the sum of edge regret lengths and also
    cost(P) - D_end.
    """
    nodes = path.nodes if isinstance(path, RootedPath) else path
    p = RootedPath.build(inst, nodes)
    total = sum(regret_distance(inst, u, v) for u, v in zip(p.nodes, p.nodes[1:]))
    assert total == p.regret
    return total


@dataclass(frozen=True, eq=False)
class EdgeColoring:
    """Red/blue labels for the edges of one rooted path.

    Edge i (between positions i and i+1) is red iff some node at position
    <= i is at least as far from the root as some node at position >= i+1.
    red_intervals lists the maximal runs of consecutive red edges as node
    sequences; every position also knows its (possibly trivial) run.
    """

    path: RootedPath
    edge_is_red: Tuple[bool, ...]
    red_intervals: Tuple[Tuple[int, ...], ...]
    span_nodes: Tuple[Tuple[int, ...], ...] = field(repr=False)
    _pos: Mapping[int, int] = field(repr=False)

    def red_subpath(self, v: int) -> Tuple[int, ...]:
        """Nodes of the maximal red subpath containing v (maybe just (v,))."""
        return self.span_nodes[self._pos[v]]

    def red_cost(self, inst: Instance) -> int:
        nodes = self.path.nodes
        return sum(inst.dist[nodes[i]][nodes[i + 1]]
                   for i, red in enumerate(self.edge_is_red) if red)


def classify_edges(inst: Instance, path: RootedPath) -> EdgeColoring:
    """Label each path edge red or blue via prefix-max / suffix-min of D.

    The total cost of red edges is at most 1.5x the path regret; this is
    asserted on output.
    """
    nodes = path.nodes
    D = inst.root_dist
    m = len(nodes)
    red = []
    if m > 1:
        prefmax = [D[nodes[0]]]
        for v in nodes[1:]:
            prefmax.append(max(prefmax[-1], D[v]))
        sufmin = [0] * m
        sufmin[-1] = D[nodes[-1]]
        for i in range(m - 2, -1, -1):
            sufmin[i] = min(sufmin[i + 1], D[nodes[i]])
        red = [prefmax[i] >= sufmin[i + 1] for i in range(m - 1)]

    # Group consecutive red edges into maximal runs; every position gets one.
    span = [(i, i) for i in range(m)]
    i = 0
    intervals = []
    while i < m - 1:
        if red[i]:
            j = i
            while j < m - 1 and red[j]:
                j += 1
            intervals.append(tuple(nodes[i:j + 1]))
            for p in range(i, j + 1):
                span[p] = (i, j)
            i = j
        else:
            i += 1
    span_nodes = tuple(tuple(nodes[a:b + 1]) for a, b in span)
    coloring = EdgeColoring(path=path, edge_is_red=tuple(red),
                            red_intervals=tuple(intervals),
                            span_nodes=span_nodes,
                            _pos={v: i for i, v in enumerate(nodes)})
    assert 2 * coloring.red_cost(inst) <= 3 * path.regret
    return coloring


def split_by_regret(inst: Instance, path: RootedPath, R: int) -> List[RootedPath]:
    """Break a path into rooted subpaths of regret at most R.

    Nodes are grouped by which window (ell*R, (ell+1)*R] their prefix regret
    falls in; each nonempty group becomes a rooted path (the first group is a
    prefix of the original, later ones are reconnected to the root). Returns
    at most max(ceil(regret/R), 1) paths whose union covers the input.
    """
    if R <= 0:
        raise ValueError(f"regret bound must be positive, got {R}")
    if path.regret <= R:
        return [path]
    nodes, prefix = path.nodes, path.prefix_regret
    groups: List[List[int]] = []
    window = 0
    current: List[int] = [nodes[0]]
    for v, pr in zip(nodes[1:], prefix[1:]):
        w = 0 if pr <= R else (pr + R - 1) // R - 1
        if w != window:
            groups.append(current)
            current = [inst.root, v]
            window = w
        else:
            current.append(v)
    groups.append(current)
    out = [RootedPath.build(inst, g) for g in groups]
    assert len(out) <= -(-path.regret // R)
    assert all(p.regret <= R for p in out)
    assert set().union(*(p.node_set for p in out)) == path.node_set
    return out


def farthest_node(inst: Instance, path: RootedPath) -> int:
    """Farthest-from-root node on the path; ties go to the smallest id."""
    best = path.nodes[0]
    for v in path.nodes:
        if (inst.root_dist[v], -v) > (inst.root_dist[best], -best):
            best = v
    return best


def preprocess_path_pair(inst: Instance, path: RootedPath) -> Tuple[RootedPath, RootedPath]:
    """Split a path into two paths that both end at its farthest node.

    The first is the prefix up to the farthest node v; the second jumps to
    the old end and walks the end-to-v portion backwards. Neither costs more
    than the original, neither has larger regret, and together they cover
    all of its nodes. If the path already ends at v the second output is the
    degenerate two-node path root->v.
    """
    v = farthest_node(inst, path)
    j = path.nodes.index(v)
    first = RootedPath.build(inst, path.nodes[:j + 1])
    if j == 0:  # trivial path
        return first, first
    tail = tuple(reversed(path.nodes[j:]))
    second = RootedPath.build(inst, (inst.root,) + tail)
    assert first.cost <= path.cost and second.cost <= path.cost
    assert first.regret <= path.regret and second.regret <= path.regret
    assert first.end == second.end == v
    return first, second


def shortcut(inst: Instance, path: RootedPath, keep: Iterable[int]) -> RootedPath:
    """Subsequence of the path restricted to keep (the root always stays)."""
    keep = set(keep)
    if not keep <= path.node_set:
        raise ValueError("keep contains nodes not on the path")
    nodes = [path.nodes[0]] + [v for v in path.nodes[1:] if v in keep]
    out = RootedPath.build(inst, nodes)
    assert out.cost <= path.cost and out.regret <= path.regret
    return out


def tight_arcs(inst: Instance) -> List[Tuple[int, int]]:
    """Arcs (u, v) with D_u + c_uv = D_v; exactly the zero-regret edges."""
    D = inst.root_dist
    arcs = []
    for u in range(inst.n):
        for v in inst.clients:
            if u != v and D[u] + inst.dist[u][v] == D[v]:
                arcs.append((u, v))
    return arcs


def zero_regret_cover(inst: Instance, targets: Iterable[int]) -> List[RootedPath]:
    """Minimum number of zero-regret rooted paths covering the target nodes.

    A zero-regret path can only use tight arcs, which form a DAG (D strictly
    increases), so this is a minimum path cover with node lower bounds,
    solved as a min-cost circulation.
    """
    from .flows import MinCostCirculation

    targets = sorted(set(targets) - {inst.root})
    if any(not 0 <= v < inst.n for v in targets):
        raise ValueError("target node out of range")
    if not targets:
        return []

    # Node-split clients: in-node 2v, out-node 2v+1; root and sink on top.
    net = MinCostCirculation(2 * inst.n + 2)
    root_out = 2 * inst.root
    sink = 2 * inst.n
    source_arc = net.add_arc(sink, root_out, lower=0, cap=inst.n, cost=1)
    internal = {}
    for v in inst.clients:
        lb = 1 if v in set(targets) else 0
        internal[v] = net.add_arc(2 * v, 2 * v + 1, lower=lb, cap=inst.n, cost=0)
    hop = {}
    for u, v in tight_arcs(inst):
        tail = root_out if u == inst.root else 2 * u + 1
        hop[(u, v)] = net.add_arc(tail, 2 * v, lower=0, cap=inst.n, cost=0)
    for v in inst.clients:
        net.add_arc(2 * v + 1, sink, lower=0, cap=inst.n, cost=0)

    net.solve()

    # Peel paths from the root, always taking the smallest-(D, id) next hop.
    out_arcs: Dict[int, List[Tuple[Tuple[int, int], int]]] = {}
    flow = {}
    for (u, v), aid in hop.items():
        f = net.flow(aid)
        if f > 0:
            flow[(u, v)] = f
            out_arcs.setdefault(u, []).append(((inst.root_dist[v], v), aid))
    for lst in out_arcs.values():
        lst.sort()
    paths = []
    for _ in range(net.flow(source_arc)):
        seq = [inst.root]
        u = inst.root
        while True:
            nxt = None
            for (_, v), _aid in out_arcs.get(u, []):
                if flow.get((u, v), 0) > 0:
                    nxt = v
                    break
            if nxt is None:
                break
            flow[(u, nxt)] -= 1
            seq.append(nxt)
            u = nxt
        paths.append(RootedPath.build(inst, seq))
    assert all(p.regret == 0 for p in paths)
    covered = set().union(*(p.node_set for p in paths)) if paths else set()
    assert covered >= set(targets)
    return paths


def metric_from_edges(n: int, edges: Iterable[Tuple[int, int, int]]) -> List[List[int]]:
    """Shortest-path closure of a weighted undirected edge list."""
    d = [[0 if i == j else INF for j in range(n)] for i in range(n)]
    for u, v, w in edges:
        w = _as_int(w)
        if w < 0:
            raise InvalidInstanceError(f"negative edge weight on ({u},{v})")
        if w < d[u][v]:
            d[u][v] = d[v][u] = w
    _floyd(d)
    if any(d[i][j] >= INF for i in range(n) for j in range(n)):
        raise InvalidInstanceError("edge list does not connect all nodes")
    return d


def _floyd(d: List[List[int]]) -> None:
    n = len(d)
    for w in range(n):
        dw = d[w]
        for u in range(n):
            du = d[u]
            uw = du[w]
            if uw >= INF:
                continue
            for v in range(n):
                alt = uw + dw[v]
                if alt < du[v]:
                    du[v] = alt


def normalize_instance(dist, root: int = 0, meta: dict | None = None) -> Instance:
    """Build a normalized Instance from a raw symmetric integer matrix.

    Takes the metric closure, then merges zero-distance node groups onto
    their smallest member (the root's group keeps the root). The original
    id -> new id map is recorded in meta["merge_map"] so solutions can be
    expanded back. Already-metric input with no zero pairs comes through
    unchanged.
    """
    rows = [[_as_int(x) for x in row] for row in dist]
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise InvalidInstanceError("distance matrix is not square")
    if not 0 <= root < n:
        raise InvalidInstanceError(f"root {root} out of range")
    for u in range(n):
        if rows[u][u] != 0:
            raise InvalidInstanceError(f"nonzero diagonal at node {u}")
        for v in range(n):
            if rows[u][v] != rows[v][u]:
                raise InvalidInstanceError(f"asymmetric entry ({u},{v})")
            if rows[u][v] < 0:
                raise InvalidInstanceError(f"negative distance ({u},{v})")
    _floyd(rows)

    # Union zero-distance pairs; group representative is the smallest id,
    # except the root's group which is represented by the root.
    rep = list(range(n))

    def find(x: int) -> int:
        while rep[x] != x:
            rep[x] = rep[rep[x]]
            x = rep[x]
        return x

    for u in range(n):
        for v in range(u + 1, n):
            if rows[u][v] == 0:
                ru, rv = find(u), find(v)
                if ru != rv:
                    rep[max(ru, rv)] = min(ru, rv)
    groups: Dict[int, List[int]] = {}
    for v in range(n):
        groups.setdefault(find(v), []).append(v)
    reps = sorted(groups)
    new_id = {r: i for i, r in enumerate(reps)}
    merge_map = [new_id[find(v)] for v in range(n)]
    m = len(reps)
    new_rows = [[rows[reps[i]][reps[j]] for j in range(m)] for i in range(m)]
    out_meta = dict(meta or {})
    if m != n:
        out_meta["merge_map"] = merge_map
    return Instance.from_matrix(new_rows, root=merge_map[root], meta=out_meta)


def expand_merged(paths: Iterable[Sequence[int]], merge_map: Sequence[int]) -> List[List[int]]:
    """Map paths over merged ids back to original ids.

    Each merged node expands to its whole zero-distance group (smallest
    original id first); the groups are co-located so costs are unchanged.
    """
    groups: Dict[int, List[int]] = {}
    for orig, new in enumerate(merge_map):
        groups.setdefault(new, []).append(orig)
    return [[orig for v in p for orig in groups[v]] for p in paths]


def induced_instance(inst: Instance, keep: Iterable[int]) -> Tuple[Instance, List[int]]:
    """Sub-instance on {root} union keep; returns it plus new->original ids."""
    ids = [inst.root] + sorted(set(keep) - {inst.root})
    if any(not 0 <= v < inst.n for v in ids):
        raise ValueError("node id out of range")
    sub = [[inst.dist[u][v] for v in ids] for u in ids]
    return Instance.from_matrix(sub, root=0, validate=False), ids


def solution_to_dict(inst: Instance, paths: Iterable, stats: dict | None = None) -> dict:
    """JSON form of a solution: node sequences, per-path regrets, stats."""
    seqs = []
    regrets = []
    for p in paths:
        nodes = list(p.nodes) if isinstance(p, RootedPath) else list(p)
        seqs.append(nodes)
        cost = sum(inst.dist[u][v] for u, v in zip(nodes, nodes[1:]))
        regrets.append(cost - inst.root_dist[nodes[-1]])
    return {"paths": seqs, "regrets": regrets, "stats": stats or {}}


def solution_from_dict(d: Mapping) -> List[List[int]]:
    return [list(map(int, p)) for p in d["paths"]]
