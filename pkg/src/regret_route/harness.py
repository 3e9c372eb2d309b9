"""Instance generators, brute-force oracles, verifiers, and the runner.

Everything here is support machinery: deterministic generators for the
test corpus, exact small-instance oracles the solvers are measured
against, a verifier that recomputes feasibility from the raw distance
matrix, and the experiment runner behind the command line.
"""

import json
import math
import os
import random
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .core import (Instance, RootedPath, InfeasibleError, _as_int,
                   metric_from_edges)
from .pricing import HKTable, OracleUnavailableError
from .reductions import (solve_dvrp_dp, solve_dvrp_lp_round, solve_krvrp_minmax,
                         solve_multiplicative, solve_nonuniform, solve_rvrp)

ORACLE_LIMIT = 12
LP_ORACLE_LIMIT = 9


# --- generators -------------------------------------------------------------

def gen_ladder(h: int, c: int = 1) -> Instance:
    """c disjoint ladders sharing the root; rails cost h, rungs cost 1.

    Each ladder has 2h-1 levels with two nodes per level.  The meta block
    carries the canonical fractional cover: for every level one path per
    rail direction that climbs to the level, crosses the rung, and runs
    out along the other rail.  Each such path has regret exactly 1 and
    weight 1/(2h), totalling 2 - 1/h per ladder, which pins the value of
    the covering LP at regret bound 1.
    """
    h = _as_int(h)
    c = _as_int(c)
    if h < 1 or c < 1:
        raise ValueError("ladder parameters must be at least 1")
    levels = 2 * h - 1
    n = 1 + 2 * levels * c
    edges = []
    canonical = []
    for t in range(c):
        off = 1 + 2 * levels * t
        u = [off + 2 * i for i in range(levels)]
        v = [off + 2 * i + 1 for i in range(levels)]
        edges.append((0, u[0], h))
        edges.append((0, v[0], h))
        for i in range(levels - 1):
            edges.append((u[i], u[i + 1], h))
            edges.append((v[i], v[i + 1], h))
        for i in range(levels):
            edges.append((u[i], v[i], 1))
        for i in range(levels):
            canonical.append([0] + u[:i + 1] + v[i:])
            canonical.append([0] + v[:i + 1] + u[i:])
    meta = {"kind": "ladder", "h": h, "copies": c,
            "canonical_paths": canonical, "canonical_weight": [1, 2 * h]}
    return Instance.from_matrix(metric_from_edges(n, edges), meta=meta)


def gen_euclidean(n: int, seed: int, scale: int = 100) -> Instance:
    """Random points in a scale-by-scale square, distances rounded up.

    Rounding up preserves the triangle inequality (ceil is subadditive)
    and keeps distinct points at positive distance.
    """
    n = _as_int(n)
    if n < 2:
        raise ValueError("need at least two nodes")
    if scale < 1:
        raise ValueError("scale must be positive")
    rng = random.Random(seed)
    pts: List[Tuple[float, float]] = []
    while len(pts) < n:
        p = (rng.uniform(0, scale), rng.uniform(0, scale))
        if p not in pts:
            pts.append(p)
    dist = [[math.ceil(math.hypot(a[0] - b[0], a[1] - b[1]))
             for b in pts] for a in pts]
    meta = {"kind": "euclidean", "n": n, "seed": seed, "scale": scale,
            "points": [[a, b] for a, b in pts]}
    return Instance.from_matrix(dist, meta=meta)


def gen_random_metric(n: int, seed: int, max_edge: int = 60) -> Instance:
    """Shortest-path closure of a complete graph with random integer costs."""
    n = _as_int(n)
    if n < 2:
        raise ValueError("need at least two nodes")
    rng = random.Random(seed)
    edges = [(i, j, rng.randint(1, max_edge))
             for i in range(n) for j in range(i + 1, n)]
    meta = {"kind": "random", "n": n, "seed": seed, "max_edge": max_edge}
    return Instance.from_matrix(metric_from_edges(n, edges), meta=meta)


def gen_line(positions: Sequence[int]) -> Instance:
    """Nodes on the integer line; node 0 is the root."""
    pos = [_as_int(p) for p in positions]
    if len(pos) < 2:
        raise ValueError("need at least two nodes")
    if len(set(pos)) != len(pos):
        raise ValueError("positions must be distinct")
    dist = [[abs(a - b) for b in pos] for a in pos]
    meta = {"kind": "line", "positions": pos}
    return Instance.from_matrix(dist, meta=meta)


# --- brute-force oracles ----------------------------------------------------

def _cover_count(m: int, feasible: Sequence[bool]) -> int:
    """Fewest feasible subsets covering all m clients.

    Feasible families here are subset-closed (dropping a node from a path
    and shortcutting never raises regret or length), so partitioning is as
    good as covering and the classic submask DP applies.
    """
    full = (1 << m) - 1
    best = [0] + [m + 1] * full
    for mask in range(1, full + 1):
        low = mask & -mask
        sub = mask
        acc = m + 1
        while sub:
            if sub & low and feasible[sub]:
                cand = best[mask ^ sub] + 1
                if cand < acc:
                    acc = cand
            sub = (sub - 1) & mask
        best[mask] = acc
    return best[full]


def brute_force_rvrp(inst: Instance, R: int,
                     limit: int = ORACLE_LIMIT) -> int:
    """Exact minimum number of regret-<=R rooted paths covering all clients."""
    R = _as_int(R)
    if R < 0:
        raise ValueError("regret bound must be nonnegative")
    m = len(inst.clients)
    if m == 0:
        return 0
    table = HKTable(inst, threshold=limit)
    feasible = [False] + [table.min_regret[mask] <= R
                          for mask in range(1, 1 << m)]
    return _cover_count(m, feasible)


def brute_force_dvrp(inst: Instance, cap: int,
                     limit: int = ORACLE_LIMIT) -> int:
    """Exact minimum number of length-<=cap rooted paths covering all."""
    cap = _as_int(cap)
    far = [v for v in inst.clients if inst.root_dist[v] > cap]
    if far:
        raise InfeasibleError(
            f"nodes {far} lie beyond distance {cap} from the root",
            nodes=far)
    m = len(inst.clients)
    if m == 0:
        return 0
    table = HKTable(inst, threshold=limit)
    feasible = [False] + [table.min_length[mask] <= cap
                          for mask in range(1, 1 << m)]
    return _cover_count(m, feasible)


def brute_force_krvrp(inst: Instance, k: int,
                      limit: int = ORACLE_LIMIT) -> int:
    """Exact minimum over <=k-path covers of the maximum path regret."""
    k = _as_int(k)
    if k < 1:
        raise ValueError("path budget must be at least 1")
    m = len(inst.clients)
    if m == 0:
        return 0
    table = HKTable(inst, threshold=limit)
    values = sorted({table.min_regret[mask] for mask in range(1, 1 << m)})
    lo, hi = 0, len(values) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        feasible = [False] + [table.min_regret[mask] <= values[mid]
                              for mask in range(1, 1 << m)]
        if _cover_count(m, feasible) <= k:
            hi = mid
        else:
            lo = mid + 1
    return values[lo]


def brute_force_lp(inst: Instance, bound: int, kind: str = "regret",
                   limit: int = LP_ORACLE_LIMIT) -> float:
    """Covering-LP value over every budget-feasible rooted path.

    Enumerates all simple rooted paths by depth-first search (pruned on
    the prefix budget, which is monotone for both regret and length),
    keeps the maximal feasible node sets, and solves the LP with an
    off-the-shelf solver.  Entirely independent of the column-generation
    stack, which this value is used to cross-check.
    """
    from scipy.optimize import linprog

    bound = _as_int(bound)
    if kind not in ("regret", "length"):
        raise ValueError(f"unknown budget kind {kind!r}")
    if bound < 0:
        raise ValueError("budget must be nonnegative")
    clients = inst.clients
    m = len(clients)
    if m > limit:
        raise OracleUnavailableError(
            f"{m} clients exceed the enumeration threshold {limit}")
    if m == 0:
        return 0.0
    index = {v: i for i, v in enumerate(clients)}
    D, dist = inst.root_dist, inst.dist

    feasible = set()

    def extend(u: int, mask: int, cost: int) -> None:
        for v in clients:
            bit = 1 << index[v]
            if mask & bit:
                continue
            new = cost + dist[u][v]
            excess = new - D[v] if kind == "regret" else new
            if excess > bound:
                continue
            feasible.add(mask | bit)
            extend(v, mask | bit, new)

    extend(inst.root, 0, 0)

    uncovered = [clients[i] for i in range(m)
                 if not any(mask >> i & 1 for mask in feasible)]
    if uncovered:
        raise InfeasibleError(
            f"nodes {uncovered} unreachable within the budget",
            nodes=uncovered)
    maximal = [mask for mask in feasible
               if not any(other != mask and other & mask == mask
                          for other in feasible)]
    rows = [[-1.0 if mask >> i & 1 else 0.0 for mask in maximal]
            for i in range(m)]
    res = linprog(c=[1.0] * len(maximal), A_ub=rows, b_ub=[-1.0] * m,
                  bounds=(0, None), method="highs")
    if res.status != 0:
        raise InfeasibleError(f"LP solver failed: {res.message}")
    return float(res.fun)


# --- verifier ---------------------------------------------------------------

def verify(inst: Instance, paths: Iterable, mode: str,
           params: Optional[Mapping] = None) -> dict:
    """Recompute feasibility of a solution from the distance matrix alone.

    Accepts raw node sequences or path objects, trusting neither costs
    nor regrets.  Checks structure (rooted, valid ids, no repeats),
    coverage, and the per-mode guarantee; failures become report entries
    rather than exceptions.
    """
    if mode not in ("rvrp", "dvrp", "multiplicative", "nonuniform"):
        raise ValueError(f"unknown verification mode {mode!r}")
    params = dict(params or {})
    failures: List[dict] = []
    D, dist = inst.root_dist, inst.dist

    seqs = [list(p.nodes) if isinstance(p, RootedPath) else
            [int(v) for v in p] for p in paths]
    visits: Dict[int, List[int]] = {}
    lengths: Dict[int, int] = {}
    for idx, seq in enumerate(seqs):
        if not seq or seq[0] != inst.root:
            failures.append({"kind": "structure", "path": idx,
                             "detail": "path does not start at the root"})
            continue
        if any(not 0 <= v < inst.n for v in seq):
            failures.append({"kind": "structure", "path": idx,
                             "detail": "node id out of range"})
            continue
        if len(set(seq)) != len(seq):
            failures.append({"kind": "structure", "path": idx,
                             "detail": "repeated node"})
            continue
        cost = 0
        for u, v in zip(seq, seq[1:]):
            cost += dist[u][v]
            visits.setdefault(v, []).append(cost)
        lengths[idx] = cost

    missing = sorted(set(inst.clients) - set(visits))
    for v in missing:
        failures.append({"kind": "coverage", "node": v,
                         "detail": "client not visited by any path"})

    if mode == "rvrp":
        R = _as_int(params["regret"])
        for v, times in sorted(visits.items()):
            reg = min(times) - D[v]
            if reg > R:
                failures.append({"kind": "regret", "node": v,
                                 "detail": f"best regret {reg} exceeds {R}"})
    elif mode == "dvrp":
        cap = _as_int(params["dist"])
        for idx, cost in sorted(lengths.items()):
            if cost > cap:
                failures.append({"kind": "length", "path": idx,
                                 "detail": f"length {cost} exceeds {cap}"})
    elif mode == "multiplicative":
        ratio = Fraction(params["ratio"])
        for v, times in sorted(visits.items()):
            if min(times) > ratio * D[v]:
                failures.append(
                    {"kind": "visit_time", "node": v,
                     "detail": f"first visit {min(times)} exceeds "
                               f"{ratio} * {D[v]}"})
    elif mode == "nonuniform":
        bounds = {int(v): _as_int(b) for v, b in params["bounds"].items()}
        for v, times in sorted(visits.items()):
            if v == inst.root:
                continue
            reg = min(times) - D[v]
            if reg > bounds.get(v, 0):
                failures.append(
                    {"kind": "regret", "node": v,
                     "detail": f"best regret {reg} exceeds "
                               f"{bounds.get(v, 0)}"})

    regs = [min(t) - D[v] for v, t in visits.items()]
    stats = {"paths": len(seqs), "covered": len(visits),
             "max_length": max(lengths.values(), default=0),
             "max_regret": max(regs, default=0),
             "total_regret": sum(cost - D[seqs[idx][-1]]
                                 for idx, cost in lengths.items())}
    return {"mode": mode, "ok": not failures, "failures": failures,
            "stats": stats}


# --- experiment runner ------------------------------------------------------

def run_solver(solver: str, inst: Instance, params: Mapping,
               diagnostics: Optional[dict] = None) -> List[RootedPath]:
    """Dispatch a named solver; the same table drives the CLI."""
    if diagnostics is None:
        diagnostics = {}
    if solver == "rvrp":
        threshold = params.get("threshold")
        return solve_rvrp(inst, params["regret"],
                          threshold=Fraction(threshold) if threshold else None,
                          exact_threshold=params.get("exact_threshold", 16),
                          diagnostics=diagnostics)
    if solver == "dvrp-dp":
        return solve_dvrp_dp(inst, params["dist"],
                             exact_threshold=params.get("exact_threshold", 16),
                             diagnostics=diagnostics)
    if solver == "dvrp-lp":
        return solve_dvrp_lp_round(
            inst, params["dist"],
            exact_threshold=params.get("exact_threshold", 16),
            diagnostics=diagnostics)
    if solver == "mult":
        return solve_multiplicative(
            inst, Fraction(params["ratio"]),
            exact_threshold=params.get("exact_threshold", 16),
            diagnostics=diagnostics)
    if solver == "nonuniform":
        bounds = {int(v): _as_int(b) for v, b in params["bounds"].items()}
        return solve_nonuniform(
            inst, bounds, exact_threshold=params.get("exact_threshold", 16),
            diagnostics=diagnostics)
    if solver == "krvrp":
        paths, _ = solve_krvrp_minmax(
            inst, params["k"], exact_threshold=params.get("exact_threshold", 16),
            diagnostics=diagnostics)
        return paths
    raise ValueError(f"unknown solver {solver!r}")


def _verify_mode(solver: str, params: Mapping, paths: List[RootedPath]
                 ) -> Tuple[str, dict]:
    if solver == "rvrp":
        return "rvrp", {"regret": params["regret"]}
    if solver in ("dvrp-dp", "dvrp-lp"):
        return "dvrp", {"dist": params["dist"]}
    if solver == "mult":
        return "multiplicative", {"ratio": params["ratio"]}
    if solver == "nonuniform":
        return "nonuniform", {"bounds": params["bounds"]}
    # k-path covers carry no per-node budget; audit coverage and recompute
    # regrets by verifying against the worst regret actually produced.
    worst = max((p.regret for p in paths), default=0)
    return "rvrp", {"regret": worst}


def _oracle_value(solver: str, inst: Instance, params: Mapping
                  ) -> Optional[int]:
    try:
        if solver == "rvrp":
            return brute_force_rvrp(inst, params["regret"])
        if solver in ("dvrp-dp", "dvrp-lp"):
            return brute_force_dvrp(inst, params["dist"])
        if solver == "krvrp":
            return brute_force_krvrp(inst, params["k"])
    except OracleUnavailableError:
        return None
    return None


def run_job(job: Mapping, timings: bool = False) -> dict:
    """Execute one (instance, solver) pair into a report dictionary.

    Report keys: id, solver, n, params, count, total_regret, max_regret,
    max_length, lp_value (when the solver produced one), oracle (exact
    optimum when the instance is small enough, plus the solver/oracle
    ratio), bound_checks (forwarded from the solver diagnostics), ok.
    """
    inst: Instance = job["instance"]
    params = dict(job["params"])
    started = time.perf_counter()
    diag: dict = {}
    paths = run_solver(job["solver"], inst, params, diagnostics=diag)
    elapsed = time.perf_counter() - started

    mode, vparams = _verify_mode(job["solver"], params, paths)
    report_params = {k: (str(v) if isinstance(v, Fraction) else v)
                     for k, v in params.items()}
    check = verify(inst, paths, mode, vparams)
    report = {
        "id": job["id"],
        "solver": job["solver"],
        "n": inst.n,
        "params": report_params,
        "count": len(paths),
        "total_regret": sum(p.regret for p in paths),
        "max_regret": max((p.regret for p in paths), default=0),
        "max_length": max((p.cost for p in paths), default=0),
        "ok": check["ok"],
        "failures": check["failures"],
    }
    if "lp_value" in diag:
        report["lp_value"] = diag["lp_value"]
    if "bound_checks" in diag:
        report["bound_checks"] = diag["bound_checks"]
    if job.get("oracle"):
        opt = _oracle_value(job["solver"], inst, params)
        if opt is not None:
            report["oracle"] = opt
            measured = (report["max_regret"] if job["solver"] == "krvrp"
                        else report["count"])
            report["ratio"] = (None if opt == 0 else
                               round(measured / opt, 6))
    if timings:
        report["wall_ms"] = round(elapsed * 1000, 3)
    return report


def _suite_smoke(seed: int) -> List[dict]:
    line = gen_line([0, 1, 2, 4])
    star = Instance.from_matrix(
        [[0 if i == j else (1 if 0 in (i, j) else 2) for j in range(5)]
         for i in range(5)])
    ladder = gen_ladder(2, 1)
    euclid = gen_euclidean(6, seed)
    jobs = []
    for name, inst in [("line", line), ("star", star),
                       ("ladder", ladder), ("euclid", euclid)]:
        maxd = max(inst.root_dist)
        batch = [
            ("rvrp", {"regret": 0}, True),
            ("rvrp", {"regret": 2}, True),
            ("dvrp-dp", {"dist": maxd + 2}, True),
            ("dvrp-lp", {"dist": maxd + 2}, True),
            ("krvrp", {"k": 2}, True),
            ("mult", {"ratio": Fraction(3, 2)}, False),
            ("nonuniform", {"bounds": {v: v % 3 for v in inst.clients}},
             False),
        ]
        for pos, (solver, params, oracle) in enumerate(batch):
            jobs.append({"id": f"smoke-{name}-{solver}-{pos}",
                         "solver": solver, "instance": inst,
                         "params": params, "oracle": oracle})
    return jobs


def _suite_rvrp(seed: int) -> List[dict]:
    jobs = []
    for i in range(12):
        n = 6 + i % 5
        inst = (gen_random_metric(n, seed * 1000 + i) if i % 2 == 0
                else gen_euclidean(n, seed * 1000 + i))
        maxd = max(inst.root_dist)
        R = (0, 1, maxd // 2, 2 * maxd)[i % 4]
        jobs.append({"id": f"rvrp-{i:03d}", "solver": "rvrp",
                     "instance": inst, "params": {"regret": R},
                     "oracle": True})
    return jobs


def _suite_caps(seed: int) -> List[dict]:
    jobs = []
    for i in range(10):
        n = 6 + i % 4
        inst = (gen_euclidean(n, seed * 500 + i) if i % 2 == 0
                else gen_random_metric(n, seed * 500 + i))
        maxd = max(inst.root_dist)
        if i % 3 == 0:
            job = {"solver": "dvrp-dp", "params": {"dist": maxd + i},
                   "oracle": True}
        elif i % 3 == 1:
            job = {"solver": "dvrp-lp", "params": {"dist": maxd + i},
                   "oracle": True}
        else:
            job = {"solver": "mult",
                   "params": {"ratio": (Fraction(5, 4), Fraction(2))[i % 2]}}
        job.update(id=f"caps-{i:03d}", instance=inst)
        jobs.append(job)
    return jobs


SUITES = {"smoke": _suite_smoke, "rvrp": _suite_rvrp, "caps": _suite_caps}


def run_suite(name: str, seed: int = 0, threads: Optional[int] = None,
              timings: bool = False) -> List[dict]:
    """Run a named suite; reports come back in job order regardless of
    how many workers executed them (REGRET_ROUTE_THREADS caps the pool)."""
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; have {sorted(SUITES)}")
    jobs = SUITES[name](seed)
    if threads is None:
        threads = int(os.environ.get("REGRET_ROUTE_THREADS", "1"))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(lambda j: run_job(j, timings), jobs))
    else:
        reports = [run_job(j, timings) for j in jobs]
    return reports


def reports_to_jsonl(reports: Iterable[Mapping]) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in reports)
