"""Command-line front end: ``ndlgen {grammar,check,neighbors,eval-op,synth}``.

Exit codes: 0 success, 1 invalid input, 2 budget truncation under ``--strict``.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .analysis import analyze, prune_introns
from .errors import EmptyCore, NDLError
from .evolve import EvolveParams, format_history, run_evolution
from .grammar import GrammarOptions, generate_grammar
from .lang import Program, parse_operator, render, render_atom_inline, type_check
from .metrics import COMPONENTS, FitnessSpec, PRESETS, evaluate_operator, parse_fitness_spec, preset
from .runtime import ExecBudget, enumerate_neighbors
from .tcg import Configuration, Model, format_model, parse_model
from .tsp import REFERENCE_OPERATORS, load_instance, make_instance, parse_instance, reference_operators, tsp_model


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Input resolution
# ---------------------------------------------------------------------------


def _read(path: str, what: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {what} file {path}: {exc.strerror}") from None


def load_model_arg(arg: str) -> tuple[Model, str]:
    """``tsp:N`` or a model file; returns the model and its source text."""
    if arg.startswith("tsp:"):
        try:
            n = int(arg[4:])
        except ValueError:
            raise UsageError(f"bad model {arg!r}; expected tsp:N") from None
        model = tsp_model(n)
        return model, format_model(model)
    text = _read(arg, "model")
    return parse_model(text), text


def load_operator_arg(arg: str) -> Program:
    if not Path(arg).exists() and arg in REFERENCE_OPERATORS:
        return reference_operators()[arg]
    return parse_operator(_read(arg, "operator"))


def load_fitness_arg(arg: str) -> tuple[FitnessSpec, str]:
    if not Path(arg).exists() and arg in PRESETS:
        spec = preset(arg)
    else:
        spec = parse_fitness_spec(_read(arg, "fitness spec"))
    return spec, spec.to_text()


def parse_tests(text: str, model: Model) -> list[Configuration]:
    """Either an instance file (city count, then one tour per line) or one
    configuration per line written ``array = v v v; other = v v``."""
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise UsageError("no test configurations given")
    if lines[0].isdigit():
        return parse_instance(text).configurations(model)
    configs = []
    for ln in lines:
        assignment = {}
        for part in ln.split(";"):
            name, sep, vals = part.partition("=")
            if not sep:
                raise UsageError(f"malformed test configuration {ln!r}")
            try:
                assignment[name.strip()] = [int(v) for v in vals.split()]
            except ValueError:
                raise UsageError(f"malformed test configuration {ln!r}") from None
        configs.append(model.configuration(assignment))
    return configs


def format_config(model: Model, config: Configuration) -> str:
    return "; ".join(f"{t.name} = " + " ".join(map(str, config[t.name])) for t in model.decision_types)


def load_tests_arg(arg: str | None, model_arg: str, model: Model) -> tuple[list[Configuration], str]:
    if arg is None:
        if not model_arg.startswith("tsp:"):
            raise UsageError("--tests is required for non-TSP models")
        n = int(model_arg[4:])
        try:
            inst = load_instance(f"tsp{n}")
        except FileNotFoundError:
            inst = make_instance(n, (0, 1))
        configs = inst.configurations(model)
    elif not Path(arg).exists() and arg in ("tsp6", "tsp7"):
        configs = load_instance(arg).configurations(model)
    else:
        configs = parse_tests(_read(arg, "tests"), model)
    return configs, "\n".join(format_config(model, c) for c in configs) + "\n"


def _budget(args) -> ExecBudget:
    return ExecBudget(max_neighbors=args.budget_neighbors, max_steps=args.budget_steps)


def _label(path) -> str:
    return ".".join(str(i + 1) for i in path)


def _kv(key: str, value) -> str:
    if isinstance(value, bool):
        value = str(value).lower()
    return f"{key}={value}"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_grammar(args) -> int:
    model, _ = load_model_arg(args.model)
    grammar = generate_grammar(model, _grammar_options(args))
    bnf = grammar.to_bnf()
    if args.out_dir is None:
        sys.stdout.write(bnf)
        return 0
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "grammar.bnf").write_text(bnf)
    _write_manifest(out, "grammar", args, {})
    print(f"wrote {out / 'grammar.bnf'}")
    return 0


def _grammar_options(args) -> GrammarOptions:
    return GrammarOptions(n_global_refs=args.refs, n_local_refs=args.locals, max_depth=args.depth)


def cmd_check(args) -> int:
    model, _ = load_model_arg(args.model)
    program = load_operator_arg(args.op)
    types = type_check(model, program)
    report = analyze(model, program)
    print(render(program, numbered=True))
    print()
    print(_kv("type_ok", types.ok))
    for path, msg in types.errors:
        print(f"type_error {_label(path)} {msg}")
    for key, val in zip(
        ("r_used_outputs", "r_provided_inputs", "r_unique_args", "r_effective"), report.ratios
    ):
        print(_kv(key, f"{val:.6f}"))
    print(_kv("phi_code", f"{report.phi_code:.6f}"))
    print(_kv("atoms", report.n_atoms))
    print(_kv("introns", len(report.introns)))
    atoms = dict(program.walk())
    for path in sorted(report.introns):
        print(f"intron {_label(path)} {render_atom_inline(atoms[path])}  # {report.reasons[path]}")
    return 0 if types.ok else 1


def cmd_neighbors(args) -> int:
    model, _ = load_model_arg(args.model)
    program = load_operator_arg(args.op)
    types = type_check(model, program)
    if not types.ok:
        raise UsageError("operator does not type-check: " + "; ".join(m for _, m in types.errors))
    tests, _ = load_tests_arg(args.tests, args.model, model)
    if not 0 <= args.start < len(tests):
        raise UsageError(f"--start {args.start} out of range (have {len(tests)} tests)")
    start = tests[args.start]
    try:
        core = prune_introns(program, analyze(model, program))
    except EmptyCore:
        print("# every atom is an intron; the neighborhood is empty")
        print(" ".join([_kv("s", 0), _kv("u", 0), _kv("truncated", False)]))
        return 0
    ns = enumerate_neighbors(model, core, start, _budget(args))
    print(f"# start: {format_config(model, start)}")
    for cfg in ns.neighbors:
        print(format_config(model, cfg))
    print(" ".join([_kv("s", ns.size), _kv("u", ns.unique), _kv("truncated", ns.truncated)]))
    return 2 if args.strict and ns.truncated else 0


def cmd_eval_op(args) -> int:
    model, _ = load_model_arg(args.model)
    program = load_operator_arg(args.op)
    spec, _ = load_fitness_arg(args.fitness)
    tests, _ = load_tests_arg(args.tests, args.model, model)
    rec = evaluate_operator(model, program, tests, _budget(args), spec)
    cols = list(COMPONENTS) + ["composite"]
    print(f"{'test':<6}{'s':>6}{'u':>6}" + "".join(f"{c:>11}" for c in cols))
    for k, (row, st) in enumerate(zip(rec.components, rec.stats)):
        print(f"{k:<6}{st.size_s:>6}{st.unique_u:>6}" + "".join(f"{row[c]:>11.6f}" for c in cols))
    print()
    for c in cols:
        mean = sum(r[c] for r in rec.components) / len(rec.components)
        print(_kv(c, repr(mean)))
    print(_kv("type_ok", rec.type_ok))
    print(_kv("truncated", rec.truncated))
    return 2 if args.strict and rec.truncated else 0


def cmd_synth(args) -> int:
    if args.from_manifest:
        return _replay(args)
    model, model_text = load_model_arg(args.model)
    spec, fitness_text = load_fitness_arg(args.fitness)
    tests, tests_text = load_tests_arg(args.tests, args.model, model)
    return _synth(args, model, model_text, spec, fitness_text, tests, tests_text)


def _synth(args, model, model_text, spec, fitness_text, tests, tests_text) -> int:
    params = EvolveParams(
        population_size=args.pop,
        elite_size=args.elite,
        generations=args.gens,
        max_depth=args.depth,
        seed=args.seed,
    )
    grammar = generate_grammar(model, _grammar_options(args))
    out = Path(args.out_dir or "synth_out")
    out.mkdir(parents=True, exist_ok=True)
    (out / "grammar.bnf").write_text(grammar.to_bnf())
    best_seen = [float("-inf")]

    def on_generation(rec, best, population):
        if rec.best > best_seen[0]:
            best_seen[0] = rec.best
            (out / "best.ndl").write_text(render(parse_operator(best.phenotype)) + "\n")
        if not args.quiet:
            print(f"gen {rec.generation:>3}  best {rec.best:.6f}  avg {rec.avg:.6f}  stdev {rec.stdev:.6f}", flush=True)

    t0 = time.perf_counter()
    best, history = run_evolution(
        model, grammar, tests, _budget(args), spec, params, jobs=args.jobs, on_generation=on_generation
    )
    elapsed = time.perf_counter() - t0
    (out / "history.csv").write_text(format_history(history))
    extra = {
        "model_text": model_text,
        "fitness_text": fitness_text,
        "tests_text": tests_text,
        "evolve_params": asdict(params),
        "best_composite": best.score,
        "wall_clock_seconds": round(elapsed, 3),
    }
    _write_manifest(out, "synth", args, extra)
    print(_kv("best", repr(best.score)))
    print(_kv("out_dir", out))
    return 0


def _replay(args) -> int:
    try:
        manifest = json.loads(_read(args.from_manifest, "manifest"))
        saved = manifest["arguments"]
    except (json.JSONDecodeError, KeyError) as exc:
        raise UsageError(f"invalid manifest {args.from_manifest}: {exc}") from None
    out_dir = args.out_dir
    for key, val in saved.items():
        setattr(args, key, val)
    args.out_dir = out_dir or saved["out_dir"]
    args.from_manifest = None
    model = parse_model(manifest["model_text"])
    spec = parse_fitness_spec(manifest["fitness_text"])
    tests = parse_tests(manifest["tests_text"], model)
    return _synth(args, model, manifest["model_text"], spec, manifest["fitness_text"], tests, manifest["tests_text"])


def _write_manifest(out: Path, command: str, args, extra: dict):
    arguments = {k: v for k, v in vars(args).items() if k not in ("func", "from_manifest")}
    manifest = {
        "tool": "ndlgen",
        "version": __version__,
        "command": command,
        "python": platform.python_version(),
        "arguments": arguments,
        **extra,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ndlgen", description="Synthesize and inspect neighborhood operators.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, op=False, tests=False, budget=False):
        p.add_argument("--model", default="tsp:6", help="model file or tsp:N (default tsp:6)")
        if op:
            p.add_argument("--op", required=True, help=f"operator file or one of {', '.join(REFERENCE_OPERATORS)}")
        if tests:
            p.add_argument("--tests", help="tests file, or tsp6/tsp7 (default: shipped instance for tsp:N)")
        if budget:
            d = ExecBudget()
            p.add_argument("--budget-neighbors", type=int, default=d.max_neighbors)
            p.add_argument("--budget-steps", type=int, default=d.max_steps)
            p.add_argument("--strict", action="store_true", help="exit 2 when a budget truncates enumeration")

    def grammar_flags(p):
        p.add_argument("--depth", type=int, default=90, help="maximum derivation depth")
        p.add_argument("--refs", type=int, default=4, help="global refs per kind and type")
        p.add_argument("--locals", type=int, default=2, help="local refs per kind and type")

    p = sub.add_parser("grammar", help="print or write the BNF grammar for a model")
    common(p)
    grammar_flags(p)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_grammar)

    p = sub.add_parser("check", help="type-check and statically analyze an operator")
    common(p, op=True)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("neighbors", help="list the neighbors of one test configuration")
    common(p, op=True, tests=True, budget=True)
    p.add_argument("--start", type=int, default=0, help="index of the start configuration among the tests")
    p.set_defaults(func=cmd_neighbors)

    p = sub.add_parser("eval-op", help="print fitness components and the composite")
    common(p, op=True, tests=True, budget=True)
    p.add_argument("--fitness", default="2opt", help=f"fitness file or preset ({', '.join(PRESETS)})")
    p.set_defaults(func=cmd_eval_op)

    p = sub.add_parser("synth", help="evolve an operator")
    common(p, tests=True, budget=True)
    grammar_flags(p)
    p.add_argument("--fitness", default="2opt", help=f"fitness file or preset ({', '.join(PRESETS)})")
    p.add_argument("--pop", type=int, default=1000)
    p.add_argument("--elite", type=int, default=10)
    p.add_argument("--gens", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1, help="parallel evaluation processes")
    p.add_argument("--out-dir", help="output directory (default synth_out)")
    p.add_argument("--from-manifest", help="rerun with the inputs recorded in a manifest.json")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, NDLError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
