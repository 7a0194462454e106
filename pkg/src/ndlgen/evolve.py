"""Grammatical evolution of operator programs over derivation trees."""

from __future__ import annotations

import hashlib
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .grammar import Grammar, Node, grow
from .lang import parse_operator
from .metrics import FitnessRecord, FitnessSpec, evaluate_operator
from .runtime import ExecBudget
from .tcg import Configuration, Model


@dataclass
class Individual:
    tree: Node
    fitness: FitnessRecord | None = None
    phenotype: str = field(init=False)

    def __post_init__(self):
        self.phenotype = self.tree.text()

    @property
    def score(self) -> float:
        return -math.inf if self.fitness is None else self.fitness.composite

    @property
    def depth(self) -> int:
        return self.tree.depth


@dataclass(frozen=True)
class EvolveParams:
    population_size: int = 1000
    elite_size: int = 10
    generations: int = 50
    crossover_prob: float = 0.75
    mutations_per_individual: int = 2
    tournament_size: int = 2
    max_depth: int = 90
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 1:
            raise ValueError("population_size must be positive")
        if not 0 <= self.elite_size < self.population_size:
            raise ValueError("elite_size must be below population_size")
        if self.generations < 0 or self.mutations_per_individual < 0:
            raise ValueError("generations and mutations_per_individual must be non-negative")
        if not 0.0 <= self.crossover_prob <= 1.0:
            raise ValueError("crossover_prob must lie in [0, 1]")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be positive")


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best: float
    avg: float
    stdev: float
    best_hash: str


def phenotype_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def init_population(grammar: Grammar, params: EvolveParams, rng: random.Random | None = None) -> list[Individual]:
    """PI-grow individuals, each from its own seed drawn from ``rng``."""
    rng = rng or random.Random(params.seed)
    seeds = [rng.getrandbits(64) for _ in range(params.population_size)]
    return [Individual(grow(grammar, random.Random(s), grammar.start, params.max_depth)) for s in seeds]


def subtree_crossover(
    a: Individual, b: Individual, rng: random.Random, max_depth: int = 90
) -> tuple[Individual, Individual]:
    """Swap a random subtree of ``a`` with a same-symbol subtree of ``b``.

    Offspring deeper than ``max_depth`` are replaced by their parent.
    """
    a_nodes = list(a.tree.nodes())
    path_a, node_a = a_nodes[rng.randrange(len(a_nodes))]
    matches = [(p, n) for p, n in b.tree.nodes() if n.symbol == node_a.symbol]
    if not matches:
        return a, b
    path_b, node_b = matches[rng.randrange(len(matches))]
    tree_a = a.tree.replace(path_a, node_b)
    tree_b = b.tree.replace(path_b, node_a)
    child_a = Individual(tree_a) if tree_a.depth <= max_depth else a
    child_b = Individual(tree_b) if tree_b.depth <= max_depth else b
    return child_a, child_b


def subtree_mutation(ind: Individual, rng: random.Random, grammar: Grammar, max_depth: int = 90) -> Individual:
    """Regrow one random subtree within the depth left at its position."""
    nodes = list(ind.tree.nodes())
    path, node = nodes[rng.randrange(len(nodes))]
    fresh = grow(grammar, rng, node.symbol, max_depth - len(path))
    return Individual(ind.tree.replace(path, fresh))


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

_WORKER: tuple | None = None


def _init_worker(context: tuple):
    global _WORKER
    _WORKER = context


def _evaluate_text(text: str, context: tuple | None = None) -> FitnessRecord:
    model, tests, budget, spec = context or _WORKER
    return evaluate_operator(model, parse_operator(text), tests, budget, spec)


class _Evaluator:
    """Fitness by phenotype, cached; optional process pool.

    Results never depend on the pool: each evaluation is a pure function of
    the phenotype and results are assigned back by phenotype.
    """

    def __init__(self, context: tuple, jobs: int):
        self.context = context
        self.cache: dict[str, FitnessRecord] = {}
        self.pool = ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(context,)) if jobs > 1 else None

    def __call__(self, population: Sequence[Individual]):
        todo = list(dict.fromkeys(ind.phenotype for ind in population if ind.phenotype not in self.cache))
        if self.pool is not None and len(todo) > 1:
            results = self.pool.map(_evaluate_text, todo, chunksize=max(1, len(todo) // 32))
        else:
            results = (_evaluate_text(t, self.context) for t in todo)
        for text, rec in zip(todo, results):
            self.cache[text] = rec
        for ind in population:
            ind.fitness = self.cache[ind.phenotype]

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def _record(generation: int, population: Sequence[Individual]) -> GenerationRecord:
    scores = [ind.score for ind in population]
    best = max(population, key=lambda ind: ind.score)
    mean = math.fsum(scores) / len(scores)
    var = math.fsum((s - mean) ** 2 for s in scores) / len(scores)
    return GenerationRecord(generation, best.score, mean, math.sqrt(var), phenotype_hash(best.phenotype))


def _tournament(population: Sequence[Individual], rng: random.Random, size: int) -> Individual:
    picks = [population[rng.randrange(len(population))] for _ in range(size)]
    return max(picks, key=lambda ind: ind.score)


def run_evolution(
    model: Model,
    grammar: Grammar,
    tests: Sequence[Configuration],
    budget: ExecBudget,
    spec: FitnessSpec,
    params: EvolveParams,
    *,
    jobs: int = 1,
    on_generation: Callable[[GenerationRecord, Individual, list[Individual]], None] | None = None,
) -> tuple[Individual, list[GenerationRecord]]:
    """Generational loop with elitism; returns the best individual and one
    history record per evaluated generation (initial population included)."""
    rng = random.Random(params.seed)
    evaluate = _Evaluator((model, list(tests), budget, spec), jobs)
    history: list[GenerationRecord] = []

    def rank(pop):
        # stable: ties keep population order
        return sorted(pop, key=lambda ind: -ind.score)

    try:
        population = init_population(grammar, params, rng)
        evaluate(population)
        for gen in range(params.generations + 1):
            if gen > 0:
                ranked = rank(population)
                nxt = ranked[: params.elite_size]
                while len(nxt) < params.population_size:
                    p1 = _tournament(population, rng, params.tournament_size)
                    p2 = _tournament(population, rng, params.tournament_size)
                    if rng.random() < params.crossover_prob:
                        kids = subtree_crossover(p1, p2, rng, params.max_depth)
                    else:
                        kids = (p1, p2)
                    for kid in kids:
                        for _ in range(params.mutations_per_individual):
                            kid = subtree_mutation(kid, rng, grammar, params.max_depth)
                        if len(nxt) < params.population_size:
                            nxt.append(Individual(kid.tree))
                population = nxt
                evaluate(population)
            rec = _record(gen, population)
            history.append(rec)
            if on_generation is not None:
                on_generation(rec, rank(population)[0], population)
    finally:
        evaluate.close()
    return rank(population)[0], history


def format_history(history: Sequence[GenerationRecord]) -> str:
    rows = ["generation,best,avg,stdev,best_hash"]
    rows += [f"{r.generation},{r.best!r},{r.avg!r},{r.stdev!r},{r.best_hash}" for r in history]
    return "\n".join(rows) + "\n"
