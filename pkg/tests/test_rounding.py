"""Rounding pipeline: forest, witnesses, flow, grafting, end-to-end bounds."""

import math
import random
from fractions import Fraction

import pytest

from regret_route.core import RootedPath
from regret_route.harness import (brute_force_rvrp, gen_euclidean, gen_ladder,
                                  gen_line, gen_random_metric)
from regret_route.lp import (FractionalSolution, solve_minsum_lp,
                             solve_rvrp_lp)
from regret_route.rounding import (
    IntegralFlow,
    RoundingContext,
    build_forest,
    covered_within,
    cut_value,
    decompose_flow,
    default_threshold,
    graft,
    round_flow,
    round_minsum,
    round_rvrp,
    shortcut_to_witnesses,
)


def ladder_context(threshold=None):
    inst = gen_ladder(2)
    sol = solve_rvrp_lp(inst, 1)
    return RoundingContext.build(
        inst, sol, threshold if threshold is not None else default_threshold())


def test_default_threshold_value():
    d = default_threshold()
    assert abs(float(d) - (math.sqrt(3) - 1) / 2) < 1e-12
    assert 0 < d < 1
    # it minimizes the count factor 2/d + 6/(1-d)
    f = lambda x: 2 / x + 6 / (1 - x)
    assert f(float(d)) <= min(f(x / 100) for x in range(1, 100)) + 1e-9


def test_covered_within_and_cut_value():
    ctx = ladder_context()
    inst = ctx.inst
    everything = frozenset(range(inst.n))
    for v in inst.clients:
        assert covered_within(ctx, v, everything) >= 1
    with pytest.raises(ValueError):
        covered_within(ctx, 1, frozenset([2]))
    assert cut_value(ctx, everything) == 0
    with pytest.raises(ValueError):
        cut_value(ctx, frozenset())


def test_context_validates_threshold():
    inst = gen_ladder(2)
    sol = solve_rvrp_lp(inst, 1)
    with pytest.raises(ValueError):
        RoundingContext.build(inst, sol, Fraction(1))
    with pytest.raises(ValueError):
        RoundingContext.build(inst, sol, Fraction(0))


def test_forest_structure_on_ladder():
    ctx = ladder_context()
    ws = build_forest(ctx)
    # every component is inactive and every witness is eligible inside it
    for ci, comp in enumerate(ws.components):
        assert cut_value(ctx, comp) == 0
        if ci != ws.root_component:
            w = ws.witness[ci]
            assert covered_within(ctx, w, comp) >= ctx.threshold
    assert 3 * ctx.regret_mass / (1 - ctx.threshold) >= ws.forest_cost
    # tours visit their whole component and start at the anchor
    for ci, tour in ws.tours.items():
        assert set(tour) == set(ws.components[ci])


def test_shortcut_to_witnesses_monotone():
    ctx = ladder_context()
    ws = build_forest(ctx)
    D = ctx.inst.root_dist
    for i in range(len(ctx.support)):
        phi = shortcut_to_witnesses(ctx, i, ws)
        seq = phi.nodes
        assert all(D[seq[j]] < D[seq[j + 1]] for j in range(1, len(seq) - 1))
        assert phi.regret <= ctx.support[i][0].regret


def test_round_flow_integrality_and_lower_bounds():
    # every non-root node on a shortcut support arc is a witness
    inst = gen_line([0, 1, 2, 4])
    w = Fraction(1, 2)
    arc_weight = {(0, 1): w, (1, 2): w, (2, 3): w,
                  (0, 2): w, (0, 3): w}
    witnesses = [1, 2, 3]
    flow = round_flow(inst, arc_weight, witnesses, Fraction(1, 2), value_cap=3)
    assert isinstance(flow, IntegralFlow)
    for v in witnesses:
        assert flow.in_flow(v) >= 1
    assert flow.value <= 3
    assert all(f >= 0 for f in flow.arcs.values())


def test_decompose_flow_covers_arcs():
    inst = gen_line([0, 1, 2, 4])
    arc_weight = {(0, 1): Fraction(1), (1, 2): Fraction(1),
                  (2, 3): Fraction(1)}
    flow = round_flow(inst, arc_weight, [1, 2, 3], Fraction(1, 2),
                      value_cap=2)
    paths = decompose_flow(inst, flow)
    assert len(paths) == flow.value
    used = {}
    for p in paths:
        for a, b in zip(p.nodes, p.nodes[1:]):
            used[(a, b)] = used.get((a, b), 0) + 1
    assert used == flow.arcs
    assert sum(p.regret for p in paths) == flow.cost


def test_graft_covers_everything():
    ctx = ladder_context()
    ws = build_forest(ctx)
    skeleton = [RootedPath.build(ctx.inst, [ctx.inst.root, w])
                for w in ws.witnesses]
    grafted = graft(ctx.inst, skeleton, ws)
    covered = set().union(*(p.node_set for p in grafted))
    assert covered >= set(ctx.inst.clients)


def test_round_rvrp_ladder_bounds():
    inst = gen_ladder(2)
    sol = solve_rvrp_lp(inst, 1)
    diag = {}
    paths = round_rvrp(inst, 1, sol, diagnostics=diag)
    assert all(p.regret <= 1 for p in paths)
    covered = set().union(*(p.node_set for p in paths))
    assert covered >= set(inst.clients)
    checks = diag["bound_checks"]
    for name in ("forest_cost_vs_regret_mass", "forest_cost_vs_regret_budget",
                 "grafted_regret_vs_support", "count_vs_fractional_value"):
        assert checks[name]["ok"], name
    assert diag["support_acyclic"] is True
    factor = 8 + 4 * math.sqrt(3)
    assert len(paths) <= factor * float(sol.value) + 1 + 1e-9


def test_round_rvrp_zero_regret_delegates():
    inst = gen_line([0, 1, 2])
    sol = solve_rvrp_lp(inst, 0)
    paths = round_rvrp(inst, 0, sol)
    assert len(paths) == 1 and paths[0].regret == 0


def test_round_rvrp_custom_threshold():
    inst = gen_random_metric(7, 9)
    sol = solve_rvrp_lp(inst, 3)
    for d in (Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)):
        diag = {}
        paths = round_rvrp(inst, 3, sol, threshold=d, diagnostics=diag)
        assert all(p.regret <= 3 for p in paths)
        bound = (2 / d + 6 / (1 - d)) * sol.total_weight + 1
        assert len(paths) <= bound


def test_round_rvrp_randoms_feasible_and_bounded():
    factor = 8 + 4 * math.sqrt(3)
    rng = random.Random(12)
    for trial in range(12):
        n = rng.randint(5, 9)
        inst = (gen_euclidean(n, 300 + trial) if trial % 2
                else gen_random_metric(n, 300 + trial))
        R = rng.choice([1, 2, max(inst.root_dist)])
        sol = solve_rvrp_lp(inst, R)
        diag = {}
        paths = round_rvrp(inst, R, sol, diagnostics=diag)
        assert all(p.regret <= R for p in paths)
        covered = set().union(*(p.node_set for p in paths))
        assert covered >= set(inst.clients)
        assert len(paths) <= factor * float(sol.value) + 1 + 1e-9
        assert all(c["ok"] for c in diag["bound_checks"].values())


def test_round_minsum_count_and_regret_bounds():
    for k in (1, 2, 3):
        inst = gen_random_metric(7, 500 + k)
        sol = solve_minsum_lp(inst, k)
        diag = {}
        paths = round_minsum(inst, k, sol, diagnostics=diag)
        assert len(paths) <= k
        covered = set().union(*(p.node_set for p in paths))
        assert covered >= set(inst.clients)
        total = sum(p.regret for p in paths)
        assert total <= (4 + 6 * (3 * k + 2)) * float(sol.value) + 1e-9
        assert diag["bound_checks"]["total_regret_vs_fractional"]["ok"]


def test_round_minsum_rejects_bad_budget():
    inst = gen_line([0, 1])
    sol = solve_minsum_lp(inst, 1)
    with pytest.raises(ValueError):
        round_minsum(inst, 0, sol)


def test_rounded_count_vs_integral_optimum():
    # sanity: the constant-factor pipeline lands within the proven factor
    # of the true optimum as well (OPT >= LP)
    factor = 8 + 4 * math.sqrt(3)
    for seed in range(6):
        inst = gen_random_metric(6, 700 + seed)
        R = 2
        sol = solve_rvrp_lp(inst, R)
        paths = round_rvrp(inst, R, sol)
        opt = brute_force_rvrp(inst, R)
        assert len(paths) <= factor * opt + 1
