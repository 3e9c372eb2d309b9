"""Generators, exact oracles, the verifier, and the experiment runner."""

import itertools
import json

import pytest

from regret_route.core import InfeasibleError, Instance, normalize_instance
from regret_route.harness import (
    brute_force_dvrp,
    brute_force_krvrp,
    brute_force_lp,
    brute_force_rvrp,
    gen_euclidean,
    gen_ladder,
    gen_line,
    gen_random_metric,
    reports_to_jsonl,
    run_job,
    run_suite,
    verify,
)
from regret_route.pricing import OracleUnavailableError


# --- generators -------------------------------------------------------------

def test_generators_deterministic():
    assert gen_ladder(3).dist == gen_ladder(3).dist
    assert gen_euclidean(6, 42).dist == gen_euclidean(6, 42).dist
    assert gen_random_metric(7, 7).dist == gen_random_metric(7, 7).dist
    assert gen_euclidean(6, 42).dist != gen_euclidean(6, 43).dist
    assert gen_random_metric(7, 7).dist != gen_random_metric(7, 8).dist


def test_generators_are_clean_metrics():
    for seed in range(50):
        for inst in (gen_euclidean(5 + seed % 4, seed),
                     gen_random_metric(5 + seed % 4, seed)):
            d = inst.dist
            n = inst.n
            for i in range(n):
                assert d[i][i] == 0
                for j in range(n):
                    assert d[i][j] == d[j][i] >= 0
                    for k in range(n):
                        assert d[i][j] <= d[i][k] + d[k][j]
            # already normalized: re-normalizing changes nothing
            assert normalize_instance(d).dist == d


def test_ladder_meta_carries_canonical_solution():
    inst = gen_ladder(2)
    paths = inst.meta["canonical_paths"]
    covered = set().union(*(set(p[1:]) for p in paths))
    assert covered == set(inst.clients)
    num, den = inst.meta["canonical_weight"]
    assert 0 < num <= den


def test_gen_line_rejects_bad_positions():
    with pytest.raises(ValueError):
        gen_line([0])               # need at least one client
    with pytest.raises(ValueError):
        gen_line([0, 2, 2])         # positions must be distinct
    # the root may sit anywhere on the line
    mid = gen_line([5, 2, 9])
    assert mid.root_dist == (0, 3, 4)


# --- exact oracles ------------------------------------------------------------

def partition_oracle(inst, feasible_block):
    """Minimum blocks over all client partitions with feasible blocks.

    Tries every set partition and, per block, every visiting order —
    brutally exhaustive, so only run it on a handful of clients.
    """
    clients = list(inst.clients)

    def partitions(items):
        if not items:
            yield []
            return
        head, rest = items[0], items[1:]
        for sub in partitions(rest):
            for i in range(len(sub)):
                yield sub[:i] + [[head] + sub[i]] + sub[i + 1:]
            yield [[head]] + sub

    best = None
    for part in partitions(clients):
        if all(feasible_block(b) for b in part):
            if best is None or len(part) < best:
                best = len(part)
    return best


def best_block_regret(inst, block):
    D, dist = inst.root_dist, inst.dist
    best = None
    for order in itertools.permutations(block):
        cost = 0
        u = inst.root
        for v in order:
            cost += dist[u][v]
            u = v
        reg = cost - D[order[-1]]
        if best is None or reg < best:
            best = reg
    return best


def best_block_length(inst, block):
    D, dist = inst.root_dist, inst.dist
    best = None
    for order in itertools.permutations(block):
        cost = 0
        u = inst.root
        for v in order:
            cost += dist[u][v]
            u = v
        if best is None or cost < best:
            best = cost
    return best


def test_oracles_agree_with_partition_search():
    for seed in range(12):
        inst = gen_random_metric(5, 2000 + seed)
        maxd = max(inst.root_dist)
        for R in (0, 1, maxd):
            expect = partition_oracle(
                inst, lambda b: best_block_regret(inst, b) <= R)
            assert brute_force_rvrp(inst, R) == expect
        for cap in (maxd, maxd + 2):
            expect = partition_oracle(
                inst, lambda b: best_block_length(inst, b) <= cap)
            assert brute_force_dvrp(inst, cap) == expect
        for k in (1, 2, 3):
            regrets = []
            clients = list(inst.clients)
            # worst block regret, minimized over partitions into <= k blocks
            def search(part):
                if all(len(p) for p in part):
                    regrets.append(max(best_block_regret(inst, b)
                                       for b in part))
            for assign in itertools.product(range(k), repeat=len(clients)):
                part = [[c for c, a in zip(clients, assign) if a == i]
                        for i in range(k)]
                part = [p for p in part if p]
                search(part)
            assert brute_force_krvrp(inst, k) == min(regrets)


def test_oracle_frozen_values():
    line = gen_line([0, 1, 2])
    assert brute_force_rvrp(line, 0) == 1
    assert brute_force_dvrp(line, 2) == 1
    ladder = gen_ladder(2)
    assert brute_force_rvrp(ladder, 1) == 2
    star = Instance.from_matrix(
        [[0 if i == j else (1 if 0 in (i, j) else 2) for j in range(5)]
         for i in range(5)])
    assert brute_force_dvrp(star, 1) == 4
    assert brute_force_krvrp(star, 4) == 0
    # one path per client is always regret-free
    rand = gen_random_metric(6, 77)
    assert brute_force_krvrp(rand, len(rand.clients)) == 0


def test_oracle_rvrp_single_path_when_budget_huge():
    for seed in range(5):
        inst = gen_random_metric(6, 2100 + seed)
        total = sum(map(max, inst.dist))
        assert brute_force_rvrp(inst, total) == 1
        assert brute_force_dvrp(inst, total) == 1


def test_oracle_infeasible_and_limits():
    with pytest.raises(InfeasibleError):
        brute_force_dvrp(gen_line([0, 1, 5]), 3)
    big = gen_random_metric(8, 3)
    with pytest.raises(OracleUnavailableError):
        brute_force_rvrp(big, 1, limit=5)
    with pytest.raises(OracleUnavailableError):
        brute_force_lp(big, 1, limit=5)
    with pytest.raises(ValueError):
        brute_force_rvrp(big, -1)
    with pytest.raises(ValueError):
        brute_force_krvrp(big, 0)
    with pytest.raises(ValueError):
        brute_force_lp(big, 1, kind="speed")


def test_lp_oracle_frozen_values():
    ladder = gen_ladder(2)
    assert brute_force_lp(ladder, 1, "regret") == pytest.approx(1.5)
    assert brute_force_lp(ladder, 10 ** 6, "regret") == pytest.approx(1.0)
    line = gen_line([0, 1, 2])
    assert brute_force_lp(line, 0, "regret") == pytest.approx(1.0)
    assert brute_force_lp(line, 2, "length") == pytest.approx(1.0)


# --- verifier ------------------------------------------------------------------

def test_verify_accepts_plain_sequences():
    inst = gen_line([0, 1, 2])
    report = verify(inst, [[0, 1, 2]], "rvrp", {"regret": 0})
    assert report["ok"]
    assert report["stats"] == {"paths": 1, "covered": 2, "max_length": 2,
                               "max_regret": 0, "total_regret": 0}


def test_verify_flags_each_failure_kind():
    inst = gen_line([0, 1, 2, 4])
    report = verify(inst, [[0, 1]], "rvrp", {"regret": 0})
    kinds = {f["kind"] for f in report["failures"]}
    assert not report["ok"] and kinds == {"coverage"}
    assert {f["node"] for f in report["failures"]} == {2, 3}

    report = verify(inst, [[0, 2, 1, 3]], "rvrp", {"regret": 0})
    assert {f["kind"] for f in report["failures"]} == {"regret"}
    # doubling back to 1 delays both it and everything after it
    assert {f["node"] for f in report["failures"]} == {1, 3}

    report = verify(inst, [[1, 0, 2, 3]], "rvrp", {"regret": 9})
    kinds = {f["kind"] for f in report["failures"]}
    assert "structure" in kinds

    report = verify(inst, [[0, 1, 1, 2, 3]], "rvrp", {"regret": 9})
    assert any(f["detail"] == "repeated node" for f in report["failures"])

    report = verify(inst, [[0, 1, 2, 3]], "dvrp", {"dist": 3})
    assert {f["kind"] for f in report["failures"]} == {"length"}

    report = verify(inst, [[0, 3, 1, 2]], "multiplicative", {"ratio": 1})
    assert "visit_time" in {f["kind"] for f in report["failures"]}

    report = verify(inst, [[0, 2, 1, 3]], "nonuniform",
                    {"bounds": {1: 0, 2: 0, 3: 2}})
    assert {f["node"] for f in report["failures"]} == {1}

    with pytest.raises(ValueError):
        verify(inst, [[0, 1]], "walks", {})


def test_verify_recomputes_from_the_matrix():
    inst = gen_line([0, 1, 2])
    report = verify(inst, [(0, 1), (0, 2)], "rvrp", {"regret": 0})
    assert report["ok"]          # direct hops have regret 0
    report = verify(inst, [(0, 2, 1)], "rvrp", {"regret": 0})
    assert not report["ok"]      # doubling back costs 3 - 1 = 2
    assert report["failures"][0]["kind"] == "regret"


# --- runner ----------------------------------------------------------------------

def test_run_job_report_shape():
    inst = gen_random_metric(6, 55)
    job = {"id": "t-0", "solver": "rvrp", "instance": inst,
           "params": {"regret": 1}, "oracle": True}
    report = run_job(job, timings=True)
    for key in ("id", "solver", "n", "params", "count", "total_regret",
                "max_regret", "max_length", "ok", "failures", "lp_value",
                "bound_checks", "oracle", "ratio", "wall_ms"):
        assert key in report, key
    assert report["ok"] and not report["failures"]
    assert report["count"] >= report["oracle"] >= 1
    assert report["ratio"] == round(report["count"] / report["oracle"], 6)
    json.dumps(report)            # must be serializable as-is


def test_run_job_without_oracle_or_timings():
    inst = gen_line([0, 1, 2])
    report = run_job({"id": "t-1", "solver": "mult", "instance": inst,
                      "params": {"ratio": "3/2"}})
    assert report["ok"]
    assert "oracle" not in report and "wall_ms" not in report
    assert report["params"] == {"ratio": "3/2"}


def test_run_suite_deterministic_and_thread_invariant():
    first = reports_to_jsonl(run_suite("smoke", seed=3))
    second = reports_to_jsonl(run_suite("smoke", seed=3))
    assert first == second
    threaded = reports_to_jsonl(run_suite("smoke", seed=3, threads=2))
    assert threaded == first
    assert len(first.splitlines()) == 28
    for line in first.splitlines():
        assert json.loads(line)["ok"]


def test_run_suite_unknown_name():
    with pytest.raises(ValueError):
        run_suite("everything")
