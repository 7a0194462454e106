# coding: utf-8

# # Static analysis and fitness components
#
# Before running a program we can ask which atoms cannot influence the
# result (introns).  After running it on test tours we score the
# neighborhood with several components and fold them into one number.

from ndlgen.analysis import analyze, prune_introns
from ndlgen.lang import render
from ndlgen.metrics import evaluate_operator, preset
from ndlgen.tsp import load_instance, reference_operators, tsp_model

model = tsp_model(6)
tests = load_instance("tsp6").configurations(model)
ops = reference_operators()

# `2opt_raw` is the 2-opt program with three redundant atoms planted in it.

raw = ops["2opt_raw"]
report = analyze(model, raw)
print(render(raw, numbered=True))
print("introns:", sorted(report.introns))
print("code quality raw:", round(report.phi_code, 4), "clean:", analyze(model, ops["2opt"]).phi_code)

# Pruning removes the introns; what is left behaves exactly like the clean
# program.

print(render(prune_introns(raw, report)))

# Component table for the three reference programs under the default
# composite (code + 2 * (nmss + sat + size * unique * var)).

spec = preset("2opt")
header = ["operator", "code", "nmss", "sat", "size", "unique", "var", "composite"]
print("  ".join(f"{h:>9}" for h in header))
for name in ("2opt", "3opt_basic", "even_swap"):
    rec = evaluate_operator(model, ops[name], tests, spec=spec)
    comps = rec.components[0]
    row = [comps[k] for k in header[1:-1]] + [rec.composite]
    print(f"{name:>9}  " + "  ".join(f"{v:9.4f}" for v in row))

# Basic 3-opt changes exactly three successors in every neighbor, so the
# change ratio has zero spread and the variance reward sits at its floor.
