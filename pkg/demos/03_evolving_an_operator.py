# coding: utf-8

# # Evolving an operator from a grammar
#
# The grammar is generated from the model.  Random derivations are always
# well-typed programs; evolution recombines and mutates derivation trees
# and keeps the best ones.

from ndlgen.evolve import EvolveParams, format_history, run_evolution
from ndlgen.grammar import generate_grammar, sample_sentence
from ndlgen.lang import parse_operator, render
from ndlgen.metrics import preset
from ndlgen.runtime import ExecBudget
from ndlgen.tsp import load_instance, tsp_model

model = tsp_model(6)
tests = load_instance("tsp6").configurations(model)
grammar = generate_grammar(model)

print(grammar.to_bnf()[:600], "...")

# A few random programs:

for seed in range(3):
    print(sample_sentence(grammar, seed, max_depth=12))

# A short run.  Larger populations and more generations find better
# programs; this one finishes in a few seconds.

params = EvolveParams(population_size=60, elite_size=6, generations=6, seed=4)
best, history = run_evolution(
    model, grammar, tests, ExecBudget(), preset("2opt"), params,
    on_generation=lambda rec, best, pop: print(f"gen {rec.generation:2d} best {rec.best:.4f} avg {rec.avg:.4f}"),
)
print(format_history(history))
print("best composite:", round(best.score, 4))
print(render(parse_operator(best.phenotype), numbered=True))
