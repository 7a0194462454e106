from __future__ import annotations

import random

import pytest

from ndlgen.evolve import (
    EvolveParams,
    Individual,
    format_history,
    init_population,
    run_evolution,
    subtree_crossover,
    subtree_mutation,
)
from ndlgen.grammar import derivation, generate_grammar
from ndlgen.lang import parse_operator
from ndlgen.metrics import preset
from ndlgen.runtime import ExecBudget


@pytest.fixture(scope="module")
def grammar6(model6):
    return generate_grammar(model6)


def fixture_individual(grammar, program):
    return Individual(derivation(grammar, program))


class TestParams:
    @pytest.mark.parametrize(
        "kwargs",
        [dict(elite_size=5, population_size=5), dict(crossover_prob=1.5), dict(tournament_size=0), dict(population_size=0)],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            EvolveParams(**kwargs)

    def test_defaults(self):
        p = EvolveParams()
        assert (p.population_size, p.elite_size, p.generations) == (1000, 10, 50)
        assert (p.crossover_prob, p.mutations_per_individual, p.tournament_size, p.max_depth) == (0.75, 2, 2, 90)


class TestInit:
    def test_size_and_validity(self, grammar6, model6):
        from ndlgen.lang import type_check

        pop = init_population(grammar6, EvolveParams(population_size=100, elite_size=1))
        assert len(pop) == 100
        assert all(type_check(model6, parse_operator(i.phenotype)).ok for i in pop)

    def test_single(self, grammar6):
        assert len(init_population(grammar6, EvolveParams(population_size=1, elite_size=0))) == 1

    def test_deterministic(self, grammar6):
        p = EvolveParams(population_size=20, elite_size=1, seed=3)
        assert [i.phenotype for i in init_population(grammar6, p)] == [i.phenotype for i in init_population(grammar6, p)]


class TestOperators:
    def test_root_crossover_exchanges_programs(self, grammar6, ops):
        a = fixture_individual(grammar6, ops["2opt"])
        b = fixture_individual(grammar6, ops["3opt_basic"])

        class RootRng(random.Random):
            def randrange(self, n):
                return 0

        c, d = subtree_crossover(a, b, RootRng(), 90)
        assert (c.phenotype, d.phenotype) == (b.phenotype, a.phenotype)

    def test_no_match_returns_parents(self, grammar6, ops):
        a = fixture_individual(grammar6, ops["2opt"])
        b = fixture_individual(grammar6, parse_operator("value(T0, D0)"))
        # a's iterate node has no counterpart in b
        path = next(p for p, n in a.tree.nodes() if n.symbol == "<combinator>")

        class PickRng(random.Random):
            def randrange(self, n):
                return [p for p, _ in a.tree.nodes()].index(path)

        assert subtree_crossover(a, b, PickRng(), 90) == (a, b)

    def test_crossover_depth_audit(self, grammar6):
        rng = random.Random(0)
        pop = init_population(grammar6, EvolveParams(population_size=60, elite_size=1, max_depth=12))
        for _ in range(3000):
            a, b = rng.choice(pop), rng.choice(pop)
            c, d = subtree_crossover(a, b, rng, 12)
            assert c.depth <= 12 and d.depth <= 12
            parse_operator(c.phenotype)
            parse_operator(d.phenotype)

    def test_mutation_audit(self, grammar6):
        rng = random.Random(1)
        ind = init_population(grammar6, EvolveParams(population_size=1, elite_size=0))[0]
        for _ in range(3000):
            ind = subtree_mutation(ind, rng, grammar6, 20 if ind.depth <= 20 else 90)
            assert ind.depth <= 90
            parse_operator(ind.phenotype)

    def test_mutating_a_ref_changes_one_token(self, grammar6, ops):
        a = fixture_individual(grammar6, ops["3opt_basic"])
        nodes = list(a.tree.nodes())
        k = next(i for i, (_, n) in enumerate(nodes) if n.symbol == "<T_next>")

        class PickRng(random.Random):
            calls = 0

            def randrange(self, n):
                self.calls += 1
                return k if self.calls == 1 else super().randrange(n)

        b = subtree_mutation(a, PickRng(5), grammar6, 90)
        diff = [x for x, y in zip(a.phenotype.split(), b.phenotype.split()) if x != y]
        assert len(diff) <= 1
        assert len(a.phenotype.split()) == len(b.phenotype.split())


@pytest.fixture(scope="module")
def small_run(model6, tests6, grammar6):
    seen = []
    params = EvolveParams(population_size=40, elite_size=2, generations=4, seed=5)
    best, history = run_evolution(
        model6, grammar6, tests6, ExecBudget(), preset("2opt"), params,
        on_generation=lambda rec, b, pop: seen.append([i.depth for i in pop]),
    )
    return best, history, seen


class TestRun:
    def test_history_rows(self, small_run):
        _, history, _ = small_run
        assert [r.generation for r in history] == list(range(5))

    def test_elitism_monotone(self, small_run):
        _, history, _ = small_run
        bests = [r.best for r in history]
        assert bests == sorted(bests)

    def test_best_matches_history(self, small_run):
        best, history, _ = small_run
        assert best.score == history[-1].best

    def test_depths(self, small_run):
        _, _, seen = small_run
        assert all(d <= 90 for gen in seen for d in gen)

    def test_zero_generations(self, model6, tests6, grammar6):
        _, history = run_evolution(
            model6, grammar6, tests6, ExecBudget(), preset("2opt"), EvolveParams(population_size=10, elite_size=1, generations=0)
        )
        assert len(history) == 1

    def test_reproducible_across_jobs(self, model6, tests6, grammar6):
        params = EvolveParams(population_size=24, elite_size=2, generations=2, seed=11)
        runs = [
            run_evolution(model6, grammar6, tests6, ExecBudget(), preset("2opt"), params, jobs=j) for j in (1, 1, 2)
        ]
        texts = [format_history(h) for _, h in runs]
        assert texts[0] == texts[1] == texts[2]
        assert len({b.phenotype for b, _ in runs}) == 1

    def test_csv_header(self, small_run):
        _, history, _ = small_run
        assert format_history(history).splitlines()[0] == "generation,best,avg,stdev,best_hash"
