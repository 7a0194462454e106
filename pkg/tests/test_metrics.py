from __future__ import annotations

import math
import pickle

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ndlgen.errors import FitnessSpecError
from ndlgen.lang import parse_operator
from ndlgen.metrics import (
    FitnessParams,
    FitnessSpec,
    NeighborhoodStats,
    default_beta_s,
    evaluate_operator,
    neighborhood_stats,
    parse_fitness_spec,
    phi_nmss,
    phi_sat,
    phi_size,
    phi_unique,
    phi_var,
    preset,
)
from ndlgen.runtime import NeighborSet, enumerate_neighbors

TYPES = ("all_diff_next", "all_diff_order", "self_diff_next")


def stats(ch_avg=0.0, ch_stdev=0.0, sat_min=None, sat_max=None, s=1, u=1):
    sat_min = sat_min or {t: 1.0 for t in TYPES}
    sat_max = sat_max or dict(sat_min)
    return NeighborhoodStats(s, u, 0.0, 1.0, ch_avg, ch_stdev, sat_min, sat_max, dict(sat_min), {t: 0.0 for t in TYPES})


class TestComponents:
    def test_beta_s(self):
        assert default_beta_s(6) == 15
        assert default_beta_s(6) == math.factorial(6) // (2 * math.factorial(4))

    @pytest.mark.parametrize("u, expected", [(7.5, 0.5), (0, 1 / (1 + math.exp(3.75))), (15, 1 / (1 + math.exp(-3.75)))])
    def test_phi_size(self, u, expected):
        assert phi_size(u, FitnessParams(), n_vars=6) == pytest.approx(expected, abs=1e-12)

    def test_phi_size_needs_beta(self):
        with pytest.raises(ValueError):
            phi_size(3, FitnessParams())

    def test_phi_unique(self):
        assert phi_unique(5, 10) == 0.5
        assert phi_unique(4, 4) == 1.0
        assert phi_unique(0, 0) == 0.0

    def test_phi_nmss(self, model6):
        assert phi_nmss(stats(ch_avg=1 / 3), model6) == pytest.approx(0.5, abs=1e-12)
        assert phi_nmss(stats(ch_avg=0.0), model6) == 0.0
        assert phi_nmss(stats(ch_avg=0.5, sat_min={t: 0.0 for t in TYPES}), model6) == 0.0

    def test_phi_sat(self, model6):
        assert phi_sat(stats(), model6) == 1.0
        partial = {"all_diff_next": 0.9, "all_diff_order": 1.0, "self_diff_next": 1.0}
        maxes = {t: 1.0 for t in TYPES}
        assert phi_sat(stats(sat_min=partial, sat_max=maxes), model6) == pytest.approx((2 + 1 / 6) / 3)
        zero = {t: 0.0 for t in TYPES}
        assert phi_sat(stats(sat_min=zero, sat_max=zero), model6) == 0.0

    @pytest.mark.parametrize(
        "sd, expected", [(0.06, 0.5), (0.0, 1 / (1 + math.exp(2.4))), (0.2, 1 / (1 + math.exp(-5.6)))]
    )
    def test_phi_var(self, sd, expected):
        assert phi_var(stats(ch_stdev=sd), FitnessParams()) == pytest.approx(expected, abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 60), st.floats(0, 60))
    def test_phi_size_monotone(self, a, b):
        p = FitnessParams(beta_s=15.0)
        if a < b:
            assert phi_size(a, p) <= phi_size(b, p)
        assert 0.0 <= phi_size(a, p) <= 1.0

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 0.5), st.floats(0, 0.5))
    def test_phi_var_monotone(self, a, b):
        p = FitnessParams()
        if a < b:
            assert phi_var(stats(ch_stdev=a), p) <= phi_var(stats(ch_stdev=b), p)

    def test_logistic_extremes(self):
        assert phi_size(1e6, FitnessParams(beta_s=15.0)) == 1.0
        assert phi_size(-1e6, FitnessParams(beta_s=15.0)) == pytest.approx(0.0)


class TestStats:
    def test_identity_neighbor(self, model6, tests6):
        st_ = neighborhood_stats(model6, tests6[0], NeighborSet([tests6[0]]))
        assert (st_.size_s, st_.unique_u) == (1, 1)
        assert (st_.ch_min, st_.ch_max, st_.ch_avg, st_.ch_stdev) == (0, 0, 0, 0)

    def test_empty(self, model6, tests6):
        st_ = neighborhood_stats(model6, tests6[0], NeighborSet())
        assert st_.size_s == 0 and st_.ch_avg == 0 and all(v == 0 for v in st_.sat_max.values())

    def test_two_opt_admissible(self, model6, tests6, ops):
        for start in tests6:
            st_ = neighborhood_stats(model6, start, enumerate_neighbors(model6, ops["2opt"], start))
            assert all(st_.sat_min[t] == 1.0 for t in TYPES)
            assert st_.unique_u <= st_.size_s

    def test_three_opt_constant(self, model6, tests6, ops):
        for start in tests6:
            st_ = neighborhood_stats(model6, start, enumerate_neighbors(model6, ops["3opt_basic"], start))
            assert st_.ch_stdev == 0.0 and st_.ch_avg == pytest.approx(0.5)

    def test_population_stdev(self, model6, tests6):
        a = tests6[0]
        b = a.replace(next=(a["next"][1], a["next"][0]) + a["next"][2:])
        st_ = neighborhood_stats(model6, a, NeighborSet([a, b]))
        # changes 0 and 2/6: population stdev is half the spread
        assert st_.ch_stdev == pytest.approx(1 / 6)


class TestSpec:
    def test_presets_parse(self):
        assert preset("2opt").expression == "code + 2*(nmss + sat + size*unique*var)"
        assert "var" not in preset("3opt").expression
        assert "amount" not in preset("3swap").expression

    def test_combine(self):
        spec = FitnessSpec("code + 2*(nmss + sat + size*unique*var)")
        comps = dict(code=1.0, nmss=0.5, sat=1.0, size=0.5, unique=1.0, var=0.5)
        assert spec.combine(comps) == pytest.approx(1 + 2 * (0.5 + 1 + 0.25))

    def test_amount_rejected(self):
        with pytest.raises(FitnessSpecError, match="amount"):
            FitnessSpec("code + 0.05*amount")

    @pytest.mark.parametrize("expr", ["code - sat", "__import__('os')", "code ** 2", "foo", "code +", "1e999*code"])
    def test_bad_expressions(self, expr):
        with pytest.raises(FitnessSpecError):
            FitnessSpec(expr)

    def test_file_round_trip(self):
        spec = parse_fitness_spec("alpha_s = 0.25\nbeta_s = 10\nexpression = code + sat\n")
        assert spec.params == FitnessParams(alpha_s=0.25, beta_s=10.0)
        assert parse_fitness_spec(spec.to_text()) == spec

    def test_file_errors(self):
        with pytest.raises(FitnessSpecError):
            parse_fitness_spec("alpha_s = 1\n")
        with pytest.raises(FitnessSpecError):
            parse_fitness_spec("gamma = 1\nexpression = code\n")
        with pytest.raises(FitnessSpecError):
            preset("4opt")

    def test_pickles(self):
        spec = preset("3swap")
        assert pickle.loads(pickle.dumps(spec)) == spec


class TestEvaluate:
    def test_ranking(self, model6, tests6, ops):
        spec = preset("2opt")
        two = evaluate_operator(model6, ops["2opt"], tests6, spec=spec)
        three = evaluate_operator(model6, ops["3opt_basic"], tests6, spec=spec)
        assert two.composite > three.composite

    def test_three_opt_preset_prefers_three_opt(self, model6, tests6, ops):
        spec = preset("3opt")
        assert evaluate_operator(model6, ops["3opt_basic"], tests6, spec=spec).composite > evaluate_operator(
            model6, ops["2opt"], tests6, spec=spec
        ).composite

    def test_empty_core_keeps_code(self, model6, tests6):
        rec = evaluate_operator(model6, parse_operator("value(T0, D0)"), tests6)
        assert rec.components[0]["nmss"] == 0.0
        assert rec.composite == pytest.approx(rec.static.phi_code)

    def test_identity_program(self, model6, tests6):
        rec = evaluate_operator(model6, parse_operator("variable(D0, T0), value(T0, D1), set(T0, D1)"), tests6)
        assert rec.components[0]["nmss"] == 0.0

    def test_type_error_folds_into_score(self, model6, tests6):
        rec = evaluate_operator(model6, parse_operator("constraint(nope, T0, T1), swap(T0, T1)"), tests6)
        assert not rec.type_ok and rec.components[0]["size"] == 0.0

    def test_mean_is_symmetric(self, model6, tests6, ops):
        a = evaluate_operator(model6, ops["even_swap"], tests6).composite
        b = evaluate_operator(model6, ops["even_swap"], tests6[::-1]).composite
        assert a == pytest.approx(b, abs=1e-15)

    @pytest.mark.parametrize("name", ["2opt", "2opt_raw", "3opt_basic", "even_swap"])
    def test_ranges(self, model6, tests6, ops, name):
        rec = evaluate_operator(model6, ops[name], tests6)
        for row in rec.components:
            assert all(0.0 <= row[k] <= 1.0 for k in ("code", "nmss", "sat", "size", "unique", "var"))
        assert 0.0 < rec.composite < 7.0

    def test_no_tests(self, model6, ops):
        with pytest.raises(ValueError):
            evaluate_operator(model6, ops["2opt"], [])
