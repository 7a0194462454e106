# coding: utf-8

# # Tours, constraint graphs and hand-written operators
#
# A tour over n cities is a successor array `next`.  The model wraps it in a
# typed constraint graph whose edges say "these two successors differ" and
# "nobody is their own successor".  An operator program walks that graph,
# binds variables and rewrites values; every complete run of the program is
# one neighbor.

import numpy as np

from ndlgen.lang import render
from ndlgen.runtime import enumerate_neighbors
from ndlgen.tcg import satisfied_ratio
from ndlgen.tsp import random_tour, reference_operators, tsp_model

model = tsp_model(6)
start = random_tour(6, seed=3, model=model)
print("start tour next:", start["next"])

# The shipped 2-opt program, one atom per line:

ops = reference_operators()
print(render(ops["2opt"], numbered=True))

# Enumerate its neighborhood.  A reversed segment can be written in either
# travel direction, so the raw list repeats tours; as undirected edge sets
# there are 6*3/2 = 9 distinct moves.

ns = enumerate_neighbors(model, ops["2opt"], start)


def edges(nxt):
    return frozenset(frozenset((i, j)) for i, j in enumerate(nxt, 1))


print("neighbors:", ns.size, "unique:", len(set(ns.neighbors)),
      "undirected:", len({edges(c["next"]) for c in ns.neighbors}))
for config in ns.neighbors[:3]:
    print("  ", config["next"])

# Every neighbor is still a single Hamiltonian cycle, so all three
# constraint types are fully satisfied:

ratios = np.array(
    [[satisfied_ratio(model, t.name, c) for t in model.constraint_types] for c in ns.neighbors]
)
print("min satisfied ratio per type:", ratios.min(axis=0))

# The even-swap operator exchanges values pairwise.  On six cities its final
# states stay admissible; on seven an odd element is left over and some
# constraint breaks.

for n in (6, 7):
    m = tsp_model(n)
    finals = enumerate_neighbors(m, ops["even_swap"], random_tour(n, seed=1, model=m)).final_neighbors()
    worst = min(satisfied_ratio(m, t.name, c) for c in finals for t in m.constraint_types)
    print(f"n={n}: {len(finals)} final states, worst satisfied ratio {worst:.3f}")
