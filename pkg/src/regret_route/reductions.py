"""Solvers layered on the regret-bounded core.

The base solver covers all clients with few paths of bounded additive
regret (LP + rounding).  Everything else reduces to it: multiplicative
regret via distance rings chained into walks, distance caps via either a
doubling DP or an LP partition, per-node bounds via regret classes, and
k-path covers via the count-capped LP.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .core import (Instance, RootedPath, InfeasibleError, _as_int,
                   induced_instance, zero_regret_cover)
from .lp import (DEFAULT_EXACT_THRESHOLD, solve_dvrp_lp, solve_minsum_lp,
                 solve_rvrp_lp, preprocess_fractional)
from .pricing import HKTable, OracleUnavailableError
from .rounding import round_minsum, round_rvrp


def solve_rvrp(inst: Instance, R: int, threshold: Optional[Fraction] = None,
               exact_threshold: int = DEFAULT_EXACT_THRESHOLD,
               hk_table: Optional[HKTable] = None,
               diagnostics: Optional[dict] = None) -> List[RootedPath]:
    """Cover all clients with rooted paths of regret at most R.

    R = 0 is solved exactly as a min path cover of the tight arcs; R > 0
    goes through the configuration LP and the rounding pipeline, so the
    number of paths is within a constant factor of the fractional optimum.
    """
    R = _as_int(R)
    if R < 0:
        raise ValueError("regret bound must be nonnegative")
    if diagnostics is None:
        diagnostics = {}
    if not inst.clients:
        return []
    if R == 0:
        paths = zero_regret_cover(inst, inst.clients)
        diagnostics.update(path_count=len(paths), max_regret=0,
                           total_regret=0)
        return paths
    sol = solve_rvrp_lp(inst, R, exact_threshold=exact_threshold,
                        hk_table=hk_table)
    return round_rvrp(inst, R, sol, threshold=threshold,
                      diagnostics=diagnostics)


def _cover_subset(inst: Instance, nodes: Sequence[int], bound: int,
                  exact_threshold: int,
                  hk_table: Optional[HKTable] = None) -> List[RootedPath]:
    """solve_rvrp on the sub-instance induced by nodes, mapped back.

    The induced metric is a restriction of the original, so mapped paths
    keep their cost and regret verbatim.
    """
    sub, ids = induced_instance(inst, nodes)
    sub_paths = solve_rvrp(sub, bound, exact_threshold=exact_threshold,
                           hk_table=hk_table)
    return [RootedPath.build(inst, [ids[v] for v in p.nodes])
            for p in sub_paths]


# --- multiplicative regret ------------------------------------------------

def _chain_period(delta_m: Fraction) -> int:
    """Smallest M with 2^M >= 3 + 8/delta_m."""
    target = 3 + 8 / delta_m
    M = 0
    while Fraction(2 ** M) < target:
        M += 1
    return M


def solve_multiplicative(inst: Instance, ratio,
                         exact_threshold: int = DEFAULT_EXACT_THRESHOLD,
                         diagnostics: Optional[dict] = None
                         ) -> List[RootedPath]:
    """Cover all clients so node v is first visited within ratio * D_v.

    Clients are bucketed into distance rings V_i = {2^(i-1) <= D_v < 2^i}.
    Each ring gets an additive solve at bound floor((ratio-1) * 2^(i-2)),
    and the j-th paths of every M-th ring are chained through the root into
    one walk (shortcut past the repeated root, which only hastens visits).
    The chain period M is large enough that earlier segments of a walk are
    geometrically shorter than the ring ahead, keeping every visit within
    the multiplicative budget; each visit time is asserted exactly.
    """
    ratio = Fraction(ratio)
    if ratio < 1:
        raise ValueError("multiplicative bound must be at least 1")
    if diagnostics is None:
        diagnostics = {}
    if not inst.clients:
        return []
    if ratio == 1:
        return zero_regret_cover(inst, inst.clients)
    delta_m = ratio - 1

    D = inst.root_dist
    zero_clients = sorted(v for v in inst.clients if D[v] == 0)
    rings: Dict[int, List[int]] = {}
    for v in inst.clients:
        if D[v] > 0:
            rings.setdefault(D[v].bit_length(), []).append(v)

    covers: Dict[int, List[RootedPath]] = {}
    ring_info = {}
    for i, ring in sorted(rings.items()):
        scaled = delta_m * Fraction(2 ** i, 4)
        bound = scaled.numerator // scaled.denominator
        covers[i] = _cover_subset(inst, ring, bound, exact_threshold)
        ring_info[i] = {"bound": bound, "size": len(ring),
                        "paths": len(covers[i])}
    width = max((len(ps) for ps in covers.values()), default=0)
    period = _chain_period(delta_m)

    walks: List[RootedPath] = []
    for residue in range(period):
        indices = sorted(i for i in covers if i % period == residue)
        for j in range(width):
            seq = [inst.root]
            for i in indices:
                if j < len(covers[i]):
                    seq.extend(covers[i][j].nodes[1:])
            if len(seq) > 1:
                walks.append(RootedPath.build(inst, seq))

    if zero_clients:
        rest = walks[0].nodes[1:] if walks else ()
        head = RootedPath.build(inst, [inst.root] + zero_clients + list(rest))
        walks = [head] + walks[1:]

    covered = set()
    for w in walks:
        for idx, v in enumerate(w.nodes):
            if v in covered or v == inst.root:
                continue
            covered.add(v)
            # exact rational check of the headline guarantee
            assert w.visit_cost(idx, inst) <= ratio * D[v], \
                f"node {v} visited too late"
    assert covered == set(inst.clients)
    diagnostics.update(rings=ring_info, chain_period=period,
                       path_count=len(walks))
    return walks


# --- distance-capped covers -----------------------------------------------

@dataclass
class DvrpDpState:
    """Trace of the doubling DP for distance-capped covering.

    S[i] holds the clients within 2^i of the cap (S[M] is everything),
    F[i] the recurrence value, P[i] a cover of S[i] by paths of length at
    most the cap, and choice[i] the regret exponent picked at index i.
    """

    cap: int
    M: int
    S: List[List[int]]
    F: List[int]
    P: List[List[RootedPath]]
    choice: List[Optional[int]]


def _length_prefix(inst: Instance, path: RootedPath, cap: int) -> RootedPath:
    """Longest prefix of the path with total length at most cap."""
    j = len(path.nodes)
    while path.visit_cost(j - 1, inst) > cap:
        j -= 1
    return RootedPath.build(inst, path.nodes[:j])


def _prune_redundant(paths: List[RootedPath]) -> List[RootedPath]:
    """Drop paths every client of which is covered elsewhere; deterministic.

    Shorter node sequences are offered up first, so the survivors are the
    paths that carry unique coverage.  Never increases the count and never
    uncovers a node, but routinely removes the overlap the cap recurrence
    creates between a recursive cover and the fresh prefixes.
    """
    kept = sorted(paths, key=lambda p: (len(p.nodes), p.nodes))
    changed = True
    while changed:
        changed = False
        for idx, p in enumerate(kept):
            others = set()
            for j, q in enumerate(kept):
                if j != idx:
                    others |= q.node_set
            if p.node_set - {p.nodes[0]} <= others:
                kept.pop(idx)
                changed = True
                break
    return kept


def _check_cap(inst: Instance, cap: int) -> None:
    far = [v for v in inst.clients if inst.root_dist[v] > cap]
    if far:
        raise InfeasibleError(
            f"nodes {far} lie beyond distance {cap} from the root",
            nodes=far)


def dvrp_dp_state(inst: Instance, cap: int,
                  exact_threshold: int = DEFAULT_EXACT_THRESHOLD
                  ) -> DvrpDpState:
    """Doubling DP: cover clients with paths of length at most cap.

    S_i collects the clients v with cap - D_v < 2^i, so covering S_i with
    paths of regret under 2^i is exactly as hard as respecting the cap on
    those nodes.  Index 0 is solved exactly with zero-regret paths; index
    i > 0 tries every regret scale 2^k (k < i), covers S_i at that scale,
    keeps the length-cap prefixes (nodes of S_i beyond S_k survive the
    cut: their visit cost is at most 2^k + D_v <= cap), and recurses on
    S_k for the rest.
    """
    cap = _as_int(cap)
    _check_cap(inst, cap)
    D = inst.root_dist
    clients = set(inst.clients)
    min_d = min((D[v] for v in clients), default=0)
    M = (cap - min_d).bit_length()

    S = [sorted(v for v in clients if cap - D[v] < 2 ** i)
         for i in range(M + 1)]
    assert not S or set(S[M]) == clients

    base = zero_regret_cover(inst, S[0])
    F = [len(base)]
    P = [base]
    choice: List[Optional[int]] = [None]
    for i in range(1, M + 1):
        sub, ids = induced_instance(inst, S[i])
        table = None
        if len(sub.clients) <= exact_threshold:
            table = HKTable(sub, threshold=exact_threshold)
        best = None
        for k in range(i):
            sub_paths = solve_rvrp(sub, 2 ** k,
                                   exact_threshold=exact_threshold,
                                   hk_table=table)
            cand = len(sub_paths) + F[k]
            if best is None or cand < best[0]:
                best = (cand, k, sub_paths)
        count, k, sub_paths = best
        mapped = [RootedPath.build(inst, [ids[v] for v in p.nodes])
                  for p in sub_paths]
        prefixes = [_length_prefix(inst, p, cap) for p in mapped]
        merged = _prune_redundant(
            list(P[k]) + [p for p in prefixes if not p.is_trivial])
        F.append(count)
        P.append(merged)
        choice.append(k)
        assert len(merged) <= count
        assert all(p.cost <= cap for p in merged)
        covered = set().union(*(p.node_set for p in merged)) if merged else set()
        assert covered >= set(S[i])
    return DvrpDpState(cap=cap, M=M, S=S, F=F, P=P, choice=choice)


def solve_dvrp_dp(inst: Instance, cap: int,
                  exact_threshold: int = DEFAULT_EXACT_THRESHOLD,
                  diagnostics: Optional[dict] = None) -> List[RootedPath]:
    """Cover all clients with rooted paths of length at most cap (DP route)."""
    if diagnostics is None:
        diagnostics = {}
    if not inst.clients:
        _check_cap(inst, _as_int(cap))
        return []
    state = dvrp_dp_state(inst, cap, exact_threshold=exact_threshold)
    diagnostics.update(
        cap=state.cap, levels=state.M,
        level_sizes=[len(s) for s in state.S],
        chain=[{"i": i, "k": state.choice[i], "count": state.F[i]}
               for i in range(state.M + 1)],
        path_count=len(state.P[state.M]))
    return state.P[state.M]


def solve_dvrp_lp_round(inst: Instance, cap: int,
                        exact_threshold: int = DEFAULT_EXACT_THRESHOLD,
                        diagnostics: Optional[dict] = None
                        ) -> List[RootedPath]:
    """Cover all clients with rooted paths of length at most cap (LP route).

    Solves the length-capped covering LP, rewrites its support so every
    column ends at its farthest node, and partitions the clients by
    furthest-first choice of centers v_i, grouping with each center the
    nodes covered to a 1/(3k*) extent by columns ending inside the part
    (taking the closure under captured ends).  A column containing a
    later center ends at that center or inside an earlier part, and no
    part leaks cut-mass to outside nodes, which caps the number of parts
    below 3k*.  Each part is then an additive solve at bound
    cap - D_center, so every output path obeys the cap.
    """
    cap = _as_int(cap)
    if diagnostics is None:
        diagnostics = {}
    if not inst.clients:
        _check_cap(inst, cap)
        return []
    sol = solve_dvrp_lp(inst, cap, exact_threshold=exact_threshold)
    star = preprocess_fractional(sol)
    kstar = star.total_weight
    cut = 1 / (3 * kstar)
    D = inst.root_dist

    ends: Dict[int, List[Tuple[RootedPath, Fraction]]] = {}
    for p, w in star.support():
        ends.setdefault(p.end, []).append((p, w))

    unassigned = set(inst.clients)

    def zone(center: int) -> List[int]:
        # close the part under captured ends: a column covering a still
        # unassigned node may end at a non-center member, and its mass is
        # only counted once that member's own columns join the pool
        mass: Dict[int, Fraction] = {}
        members = {center}
        frontier = [center]
        while frontier:
            for e in frontier:
                for p, w in ends.get(e, []):
                    for u in p.nodes[1:]:
                        mass[u] = mass.get(u, Fraction(0)) + w
            frontier = [u for u, m in mass.items()
                        if m >= cut and u in unassigned and u not in members]
            members.update(frontier)
        return sorted(members)

    parts: List[Tuple[int, List[int]]] = []
    part_info = []
    while unassigned:
        center = min(unassigned, key=lambda v: (-D[v], v))
        # closed parts leak no cut-mass, so the center keeps this much
        end_mass = sum((w for _, w in ends.get(center, [])), Fraction(0))
        slack = 1 - Fraction(len(parts)) * cut
        assert end_mass > slack or (not parts and end_mass >= slack)
        members = zone(center)
        assert center in members
        assert all(D[u] <= D[center] for u in members)
        unassigned -= set(members)
        parts.append((center, members))
        part_info.append({"center": center, "size": len(members),
                          "bound": cap - D[center]})
    assert len(parts) < 3 * kstar

    paths: List[RootedPath] = []
    for center, members in parts:
        got = _cover_subset(inst, members, cap - D[center], exact_threshold)
        assert all(p.cost <= cap for p in got)
        paths.extend(got)
    covered = set().union(*(p.node_set for p in paths))
    assert covered >= set(inst.clients)
    diagnostics.update(lp_value=float(sol.value), support_weight=float(kstar),
                       parts=part_info, path_count=len(paths))
    return paths


# --- per-node regret bounds -----------------------------------------------

def solve_nonuniform(inst: Instance, bounds: Mapping[int, int],
                     exact_threshold: int = DEFAULT_EXACT_THRESHOLD,
                     diagnostics: Optional[dict] = None) -> List[RootedPath]:
    """Cover all clients so node v's regret is at most its own bound.

    Clients are grouped by the power-of-two class of their bound; class i
    (2^(i-1) <= bound < 2^i) is covered by an additive solve at 2^(i-1),
    which is never above any member's bound.  Zero-bound clients get the
    exact zero-regret cover.
    """
    if diagnostics is None:
        diagnostics = {}
    classes: Dict[int, List[int]] = {}
    for v in inst.clients:
        if v not in bounds:
            raise ValueError(f"missing regret bound for node {v}")
        b = _as_int(bounds[v])
        if b < 0:
            raise ValueError(f"negative regret bound for node {v}")
        classes.setdefault(b.bit_length(), []).append(v)

    paths: List[RootedPath] = []
    class_info = []
    for i, members in sorted(classes.items()):
        bound = 0 if i == 0 else 2 ** (i - 1)
        if i == 0:
            got = zero_regret_cover(inst, members)
        else:
            got = _cover_subset(inst, members, bound, exact_threshold)
        class_info.append({"bound": bound, "size": len(members),
                           "paths": len(got)})
        paths.extend(got)

    covered = set().union(*(p.node_set for p in paths)) if paths else set()
    assert covered >= set(inst.clients)
    diagnostics.update(classes=class_info, path_count=len(paths))
    return paths


# --- k-path covers ----------------------------------------------------------

def solve_krvrp_minmax(inst: Instance, k: int,
                       exact_threshold: int = DEFAULT_EXACT_THRESHOLD,
                       diagnostics: Optional[dict] = None
                       ) -> Tuple[List[RootedPath], int]:
    """Cover all clients with at most k rooted paths, small total regret.

    Returns the paths and their maximum end regret.  The total regret is
    within an O(k) factor of the best achievable by k paths, which makes
    the max readout an O(k^2) answer for the min-max question.
    """
    k = _as_int(k)
    if k < 1:
        raise ValueError("path budget must be at least 1")
    if diagnostics is None:
        diagnostics = {}
    if not inst.clients:
        return [], 0
    sol = solve_minsum_lp(inst, k, exact_threshold=exact_threshold)
    paths = round_minsum(inst, k, sol, diagnostics=diagnostics)
    worst = max((p.regret for p in paths), default=0)
    diagnostics.update(max_regret=worst,
                       total_regret=sum(p.regret for p in paths))
    return paths, worst
