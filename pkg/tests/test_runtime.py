from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ndlgen.analysis import analyze, prune_introns
from ndlgen.errors import DomainViolation, UnprunedProgram
from ndlgen.lang import parse_operator
from ndlgen.runtime import ExecBudget, apply_modifier, enumerate_neighbors
from ndlgen.tcg import ConstantSetDecl, VariableTypeDecl, build_model
from ndlgen.tsp import random_tour, tour_config, tsp_model

from .oracles import admissible, changed, tour_sequence, two_opt_neighborhood, undirected_edges


def _atom(src):
    return parse_operator(src).atoms[0]


class TestModifiers:
    def test_swap(self):
        m = tsp_model(3)
        out = apply_modifier(m, tour_config(m, [2, 3, 1]), _atom("swap(T0, T1)"), {"T0": ("next", 1), "T1": ("next", 2)})
        assert out["next"] == (3, 2, 1)

    def test_flip(self):
        m = build_model([VariableTypeDecl("x", (1,), (2, 3, 5))])
        flip = _atom("flip(T0, D0, D1)")
        bind = {"T0": ("x", 1), "D0": 5, "D1": 2}
        assert apply_modifier(m, m.configuration({"x": [5]}), flip, bind)["x"] == (2,)
        assert apply_modifier(m, m.configuration({"x": [3]}), flip, bind)["x"] == (5,)

    def test_domain_violation(self):
        m = build_model([VariableTypeDecl("x", (1,), (2, 3))])
        with pytest.raises(DomainViolation):
            apply_modifier(m, m.configuration({"x": [2]}), _atom("set(T0, D0)"), {"T0": ("x", 1), "D0": 9})

    def test_derived_repropagated(self):
        m = tsp_model(3)
        out = apply_modifier(m, tour_config(m, [2, 3, 1]), _atom("set(T0, D0)"), {"T0": ("next", 1), "D0": 1})
        assert out["order"] == (1, None, None)


class TestEnumeration:
    def test_swap_all_pairs(self):
        m = tsp_model(3)
        p = parse_operator("constraint(all_diff_next, T0, T1), swap(T0, T1)")
        ns = enumerate_neighbors(m, p, tour_config(m, [2, 3, 1]))
        assert (ns.size, ns.unique) == (6, 3)
        assert not ns.truncated

    def test_unpruned_rejected(self, model6, ops, tests6):
        with pytest.raises(UnprunedProgram):
            enumerate_neighbors(model6, ops["2opt_raw"], tests6[0])

    def test_identity_modifier_emits_nothing(self, model6, tests6):
        p = parse_operator("variable(D0, T0), value(T0, D1), set(T0, D1)")
        assert enumerate_neighbors(model6, p, tests6[0]).size == 0

    def test_filter_prunes_top_level_branch(self, model6, tests6):
        p = parse_operator("constraint(all_diff_next, T0, T1), is_violated(all_diff_next, T0, T1), swap(T0, T1)")
        assert enumerate_neighbors(model6, p, tests6[0]).size == 0

    def test_figure_branch(self):
        # pin the first two refs to next[2] and next[5] on the identity tour
        base = tsp_model(6)
        m = build_model(base.variable_types, base.constraint_types, [ConstantSetDecl("two", (2,)), ConstantSetDecl("five", (5,))])
        body = open_fixture("2opt")
        p = parse_operator("constant(two, D8), variable(D8, T0), constant(five, D9), variable(D9, T1), " + body)
        ns = enumerate_neighbors(m, p, tour_config(m, [2, 3, 4, 5, 6, 1]), check_pruned=False)
        assert [tour_sequence(n["next"]) for n in ns.neighbors] == [[1, 2, 4, 3, 5, 6]]

    def test_deterministic_and_isolated(self, model6, ops, tests6):
        a = enumerate_neighbors(model6, ops["2opt"], tests6[0])
        b = enumerate_neighbors(model6, ops["2opt"], tests6[0])
        assert a.neighbors == b.neighbors and a.final == b.final

    def test_budget_neighbors(self, model6, ops, tests6):
        ns = enumerate_neighbors(model6, ops["2opt"], tests6[0], ExecBudget(max_neighbors=5))
        assert ns.truncated and ns.size == 5

    def test_budget_steps(self, model6, ops, tests6):
        ns = enumerate_neighbors(model6, ops["2opt"], tests6[0], ExecBudget(max_steps=50))
        assert ns.truncated and ns.steps_used == 50

    def test_budget_branch_depth(self, model6, tests6):
        p = parse_operator("constraint(all_diff_next, T0, T1), constraint(all_diff_next, T2, T3), swap(T0, T2)")
        ns = enumerate_neighbors(model6, p, tests6[0], ExecBudget(max_branch_depth=1))
        assert ns.truncated

    def test_bad_budget(self):
        with pytest.raises(ValueError):
            ExecBudget(max_steps=0)

    def test_for_each_accumulates(self):
        # set every variable of a 0/1 array to its constant in one branch
        m = build_model([VariableTypeDecl("x", (1, 2, 3), (0, 1))], [], [ConstantSetDecl("one", (1,))])
        p = parse_operator("constant(one, D0), for_each(variable(LI0, LT0), (set(LT0, D0)))")
        ns = enumerate_neighbors(m, p, m.configuration({"x": [0, 0, 0]}))
        assert [n["x"] for n in ns.neighbors] == [(1, 0, 0), (1, 1, 0), (1, 1, 1)]
        assert ns.final == [False, False, True]

    def test_bfs_over_visits_reachable_edges(self):
        m = tsp_model(4)
        p = parse_operator("variable(D0, T0), value(T0, D1), bfs_over(all_diff_next, T0, LT0-LT1, (LT1 = LT1))")
        # body never modifies, so nothing is emitted, but the program runs
        assert enumerate_neighbors(m, p, tour_config(m, [2, 3, 4, 1]), check_pruned=False).size == 0

    def test_iterate_reversed_walks_predecessors(self):
        m = tsp_model(4)
        start = tour_config(m, [2, 3, 4, 1])
        p = parse_operator(
            "variable(D0, T0), value(T0, D1), variable(D1, T1), "
            "iterate_reversed(T0, LT0-LT1, (LT1 != T1, swap(T0, LT1)))"
        )
        ns = enumerate_neighbors(m, p, start)
        assert ns.size > 0 and all(changed(n["next"], start["next"]) >= 2 for n in ns.neighbors)


def open_fixture(name):
    from importlib import resources

    return resources.files("ndlgen.data.operators").joinpath(f"{name}.ndl").read_text()


class TestReferenceOperators:
    @pytest.mark.parametrize("n", [6, 7])
    def test_two_opt_oracle(self, ops, n):
        m = tsp_model(n)
        for seed in range(5):
            start = random_tour(n, seed, m)
            ns = enumerate_neighbors(m, ops["2opt"], start)
            got = {undirected_edges(c["next"]) for c in ns.neighbors}
            want = two_opt_neighborhood(start["next"])
            assert len(want) == n * (n - 3) // 2
            assert got == want

    @settings(max_examples=25, deadline=None)
    @given(st.sampled_from([5, 6, 7, 8]), st.integers(0, 10**6))
    def test_two_opt_admissible(self, n, seed):
        from ndlgen.tsp import reference_operators

        m = tsp_model(n)
        ns = enumerate_neighbors(m, reference_operators()["2opt"], random_tour(n, seed, m))
        assert ns.size > 0
        assert all(admissible(c["next"]) for c in ns.neighbors)

    def test_three_opt_constant_change(self, model6, ops, tests6):
        for start in tests6:
            ns = enumerate_neighbors(model6, ops["3opt_basic"], start)
            assert ns.size > 0
            assert {changed(c["next"], start["next"]) for c in ns.neighbors} == {3}
            assert all(admissible(c["next"]) for c in ns.neighbors)

    def test_even_swap_parity(self, ops):
        for n, expect in ((6, True), (7, False)):
            m = tsp_model(n)
            for seed in range(3):
                finals = enumerate_neighbors(m, ops["even_swap"], random_tour(n, seed, m)).final_neighbors()
                assert finals
                assert all(admissible(c["next"]) for c in finals) == expect

    def test_pruned_equals_clean(self, model6, ops, tests6):
        pruned = prune_introns(ops["2opt_raw"], analyze(model6, ops["2opt_raw"]))
        for start in tests6:
            assert enumerate_neighbors(model6, pruned, start).neighbors == enumerate_neighbors(model6, ops["2opt"], start).neighbors
