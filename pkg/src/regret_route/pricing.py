"""Exact subset-DP pricing oracles and a local-search fallback.

The exact oracles answer argmax/argmin queries over all simple rooted paths
by scanning a Held-Karp table: HK[S][t] is the cheapest rooted path visiting
exactly client set S and ending at t. One table serves every budget kind, so
it is built once per instance and shared. Rewards are exact rationals; all
comparisons are integer comparisons after clearing denominators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .core import INF, Instance, RegretRouteError, RootedPath

DEFAULT_EXACT_THRESHOLD = 16


class OracleUnavailableError(RegretRouteError):
    """The instance exceeds the exact oracle's size threshold."""


@dataclass(frozen=True)
class PricingQuery:
    """One pricing call: per-client rewards plus a budget kind.

    budget_kind is "regret" (paths with regret <= budget), "length"
    (cost <= budget), or "min_excess" (no budget; minimize regret minus
    reward, offset by the budget-row dual).
    """

    rewards: Mapping[int, Fraction]
    budget_kind: str
    budget: int = 0
    offset: Fraction = Fraction(0)


@dataclass(frozen=True)
class PricedPath:
    path: RootedPath
    value: Fraction


class HKTable:
    """Held-Karp subset DP for one instance.

    cost[mask][i] is the cheapest cost of a rooted path visiting exactly the
    clients in mask and ending at clients[i]; parent pointers reconstruct one
    canonical optimal path. min_regret/min_length fold out the end node.
    """

    def __init__(self, inst: Instance, threshold: int = DEFAULT_EXACT_THRESHOLD):
        self.inst = inst
        self.clients = list(inst.clients)
        m = len(self.clients)
        if m > threshold:
            raise OracleUnavailableError(
                f"{m} clients exceed the exact threshold {threshold}")
        self.m = m
        dist = inst.dist
        D = inst.root_dist
        root = inst.root
        size = 1 << m
        cost = [[INF] * m for _ in range(size)]
        parent = [[-1] * m for _ in range(size)]
        for i, v in enumerate(self.clients):
            cost[1 << i][i] = dist[root][v]
        for mask in range(1, size):
            row = cost[mask]
            rest = ((size - 1) ^ mask)
            for i in range(m):
                if not mask >> i & 1:
                    continue
                base = row[i]
                if base >= INF:
                    continue
                drow = dist[self.clients[i]]
                r = rest
                while r:
                    j = (r & -r).bit_length() - 1
                    r &= r - 1
                    new = base + drow[self.clients[j]]
                    nm = mask | 1 << j
                    if new < cost[nm][j]:
                        cost[nm][j] = new
                        parent[nm][j] = i
        self.cost = cost
        self.parent = parent
        # Per-mask optima over the end node, with the canonical end cached.
        self.min_regret = [INF] * size
        self.regret_end = [-1] * size
        self.min_length = [INF] * size
        self.length_end = [-1] * size
        for mask in range(1, size):
            row = cost[mask]
            br = bl = INF
            er = el = -1
            r = mask
            while r:
                i = (r & -r).bit_length() - 1
                r &= r - 1
                c = row[i]
                if c < bl:
                    bl, el = c, i
                reg = c - D[self.clients[i]]
                if reg < br:
                    br, er = reg, i
            self.min_regret[mask] = br
            self.regret_end[mask] = er
            self.min_length[mask] = bl
            self.length_end[mask] = el

    def path_for(self, mask: int, end_index: int) -> RootedPath:
        seq = []
        i = end_index
        while i >= 0:
            seq.append(self.clients[i])
            nxt = self.parent[mask][i]
            mask ^= 1 << i
            i = nxt
        seq.append(self.inst.root)
        return RootedPath.build(self.inst, reversed(seq))

    def ends_within_regret(self, mask: int, budget: int) -> List[int]:
        D = self.inst.root_dist
        row = self.cost[mask]
        return [i for i in _bits(mask)
                if row[i] - D[self.clients[i]] <= budget]

    def ends_within_length(self, mask: int, budget: int) -> List[int]:
        row = self.cost[mask]
        return [i for i in _bits(mask) if row[i] <= budget]


def _bits(mask: int) -> List[int]:
    out = []
    while mask:
        out.append((mask & -mask).bit_length() - 1)
        mask &= mask - 1
    return out


def _scaled_rewards(table: HKTable, rewards: Mapping[int, Fraction]) -> Tuple[List[int], int]:
    """Clear denominators: returns per-client integer rewards and the scale."""
    fr = [Fraction(rewards.get(v, 0)) for v in table.clients]
    if any(f < 0 for f in fr):
        raise ValueError("rewards must be nonnegative")
    den = math.lcm(*(f.denominator for f in fr)) if fr else 1
    return [int(f * den) for f in fr], den


def _reward_sums(nums: Sequence[int], m: int) -> List[int]:
    total = [0] * (1 << m)
    for mask in range(1, 1 << m):
        low = mask & -mask
        total[mask] = total[mask ^ low] + nums[low.bit_length() - 1]
    return total


def _pick_best_mask(candidates: List[int]) -> int:
    # Fewer nodes first, then the smallest mask as a canonical order.
    return min(candidates, key=lambda mask: (bin(mask).count("1"), mask))


def _table(inst: Instance, table: Optional[HKTable], threshold: int) -> HKTable:
    if table is not None:
        return table
    return HKTable(inst, threshold=threshold)


def exact_orienteering(inst: Instance, rewards: Mapping[int, Fraction], budget: int,
                       table: Optional[HKTable] = None,
                       threshold: int = DEFAULT_EXACT_THRESHOLD) -> PricedPath:
    """Max-reward rooted path with regret at most budget; exact.

    Ties are broken toward fewer nodes, then a fixed canonical order. With
    all-zero rewards this is the trivial path at reward 0.
    """
    if budget < 0:
        raise ValueError("negative regret budget")
    t = _table(inst, table, threshold)
    nums, den = _scaled_rewards(t, rewards)
    sums = _reward_sums(nums, t.m)
    best = 0
    masks: List[int] = []
    for mask in range(1, 1 << t.m):
        if t.min_regret[mask] <= budget:
            s = sums[mask]
            if s > best:
                best, masks = s, [mask]
            elif s == best and best > 0:
                masks.append(mask)
    if best <= 0:
        return PricedPath(RootedPath.trivial(inst), Fraction(0))
    mask = _pick_best_mask(masks)
    ends = t.ends_within_regret(mask, budget)
    return PricedPath(t.path_for(mask, ends[0]), Fraction(best, den))


def exact_length_budget(inst: Instance, rewards: Mapping[int, Fraction], budget: int,
                        table: Optional[HKTable] = None,
                        threshold: int = DEFAULT_EXACT_THRESHOLD) -> PricedPath:
    """Max-reward rooted path with total length at most budget; exact."""
    if budget < 0:
        raise ValueError("negative length budget")
    t = _table(inst, table, threshold)
    nums, den = _scaled_rewards(t, rewards)
    sums = _reward_sums(nums, t.m)
    best = 0
    masks: List[int] = []
    for mask in range(1, 1 << t.m):
        if t.min_length[mask] <= budget:
            s = sums[mask]
            if s > best:
                best, masks = s, [mask]
            elif s == best and best > 0:
                masks.append(mask)
    if best <= 0:
        return PricedPath(RootedPath.trivial(inst), Fraction(0))
    mask = _pick_best_mask(masks)
    ends = t.ends_within_length(mask, budget)
    return PricedPath(t.path_for(mask, ends[0]), Fraction(best, den))


def exact_min_excess_pricing(inst: Instance, rewards: Mapping[int, Fraction],
                             offset: Fraction = Fraction(0),
                             table: Optional[HKTable] = None,
                             threshold: int = DEFAULT_EXACT_THRESHOLD) -> PricedPath:
    """Minimize regret(P) - reward(P) over rooted paths; exact.

    The empty path (value 0) is always a candidate, so the result never has
    positive value. The offset is the budget-row dual: callers admit the
    column when value < -offset. Ties go to fewer nodes, then canonical.
    """
    t = _table(inst, table, threshold)
    nums, den = _scaled_rewards(t, rewards)
    sums = _reward_sums(nums, t.m)
    best = 0  # empty path, scaled
    masks: List[int] = []
    for mask in range(1, 1 << t.m):
        v = t.min_regret[mask] * den - sums[mask]
        if v < best:
            best, masks = v, [mask]
        elif v == best and best < 0:
            masks.append(mask)
    if best >= 0:
        return PricedPath(RootedPath.trivial(inst), Fraction(0))
    mask = _pick_best_mask(masks)
    return PricedPath(t.path_for(mask, t.regret_end[mask]), Fraction(best, den))


def heuristic_pricing(inst: Instance, query: PricingQuery) -> PricedPath:
    """Greedy insertion plus 2-opt under the query's budget; no optimality.

    Any returned path satisfies the budget exactly (integer arithmetic).
    Used when the client count exceeds the exact threshold; the caller must
    then report the LP as unverified.
    """
    rewards = {v: Fraction(query.rewards.get(v, 0)) for v in inst.clients}
    if query.budget_kind == "regret":
        feasible = lambda p: p.regret <= query.budget
        objective = lambda p: sum(rewards[v] for v in p.nodes[1:])
        improves = lambda new, old: new > old
    elif query.budget_kind == "length":
        feasible = lambda p: p.cost <= query.budget
        objective = lambda p: sum(rewards[v] for v in p.nodes[1:])
        improves = lambda new, old: new > old
    elif query.budget_kind == "min_excess":
        feasible = lambda p: True
        objective = lambda p: p.regret - sum(rewards[v] for v in p.nodes[1:])
        improves = lambda new, old: new < old
    else:
        raise ValueError(f"unknown budget kind {query.budget_kind!r}")

    path = RootedPath.trivial(inst)
    value = objective(path)
    changed = True
    while changed:
        changed = False
        free = [v for v in inst.clients if v not in path.node_set]
        best = None
        for v in sorted(free):
            for pos in range(1, len(path.nodes) + 1):
                cand_nodes = path.nodes[:pos] + (v,) + path.nodes[pos:]
                cand = RootedPath.build(inst, cand_nodes)
                if not feasible(cand):
                    continue
                cand_val = objective(cand)
                if improves(cand_val, value) and (best is None or improves(cand_val, best[0])):
                    best = (cand_val, cand)
        if best is not None:
            value, path = best[0], best[1]
            changed = True
            continue
        # 2-opt: reverse an internal segment if it helps.
        nodes = path.nodes
        for i in range(1, len(nodes) - 1):
            for j in range(i + 1, len(nodes)):
                cand_nodes = nodes[:i] + tuple(reversed(nodes[i:j + 1])) + nodes[j + 1:]
                cand = RootedPath.build(inst, cand_nodes)
                if not feasible(cand):
                    continue
                cand_val = objective(cand)
                if improves(cand_val, value):
                    value, path = cand_val, cand
                    changed = True
                    break
            if changed:
                break
    return PricedPath(path, Fraction(value))
