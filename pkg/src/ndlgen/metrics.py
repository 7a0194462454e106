"""Neighborhood statistics, fitness components and composite fitness."""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Callable, Sequence

import numpy as np

from .analysis import StaticReport, analyze, prune_introns
from .errors import EmptyCore, FitnessSpecError
from .lang import Program, type_check
from .runtime import ExecBudget, NeighborSet, enumerate_neighbors
from .tcg import Configuration, Model, diff_ratio, satisfied_ratio

COMPONENTS = ("code", "nmss", "sat", "size", "unique", "var")
NEIGHBORHOOD_COMPONENTS = ("nmss", "sat", "size", "unique", "var")


@dataclass(frozen=True)
class NeighborhoodStats:
    size_s: int
    unique_u: int
    ch_min: float
    ch_max: float
    ch_avg: float
    ch_stdev: float
    sat_min: dict[str, float]
    sat_max: dict[str, float]
    sat_avg: dict[str, float]
    sat_stdev: dict[str, float]


def _summary(values) -> tuple[float, float, float, float]:
    arr = np.asarray(values, dtype=float)
    # population standard deviation: N is the whole neighborhood
    return float(arr.min()), float(arr.max()), float(arr.mean()), float(arr.std(ddof=0))


def neighborhood_stats(model: Model, start: Configuration, ns: NeighborSet) -> NeighborhoodStats:
    ctypes = [c.name for c in model.constraint_types]
    if not ns.neighbors:
        zero = {t: 0.0 for t in ctypes}
        return NeighborhoodStats(0, 0, 0.0, 0.0, 0.0, 0.0, zero, dict(zero), dict(zero), dict(zero))
    ch = [diff_ratio(start, n, model) for n in ns.neighbors]
    # identical neighbors share their ratios
    cache: dict[Configuration, list[float]] = {}
    sat_rows = []
    for n in ns.neighbors:
        row = cache.get(n)
        if row is None:
            row = cache[n] = [satisfied_ratio(model, t, n) for t in ctypes]
        sat_rows.append(row)
    sat = np.asarray(sat_rows, dtype=float)
    s_min, s_max, s_avg, s_std = {}, {}, {}, {}
    for k, t in enumerate(ctypes):
        s_min[t], s_max[t], s_avg[t], s_std[t] = _summary(sat[:, k])
    c_min, c_max, c_avg, c_std = _summary(ch)
    return NeighborhoodStats(
        ns.size, len(cache), c_min, c_max, c_avg, c_std, s_min, s_max, s_avg, s_std
    )


# ---------------------------------------------------------------------------
# Components
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitnessParams:
    alpha_s: float = 0.5
    beta_s: float | None = None  # None: |V|! / (2 (|V|-2)!)
    alpha_v: float = 40.0
    beta_v: float = 0.06

    def resolve(self, model: Model) -> "FitnessParams":
        if self.beta_s is not None:
            return self
        return replace(self, beta_s=float(default_beta_s(model.decision_count)))


def default_beta_s(n_vars: int) -> int:
    """|V|! / (2 (|V|-2)!), i.e. the number of unordered variable pairs."""
    return math.comb(n_vars, 2)


def _logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def phi_size(u: float, params: FitnessParams, n_vars: int | None = None) -> float:
    """Logistic reward for ``u`` unique neighbors, centred on beta_s / 2.

    ``n_vars`` supplies the default beta_s when ``params`` leaves it unset.
    """
    beta_s = params.beta_s
    if beta_s is None:
        if n_vars is None:
            raise ValueError("beta_s unset: pass n_vars or resolve the params against a model")
        beta_s = default_beta_s(n_vars)
    return _logistic(-params.alpha_s * (-u + beta_s / 2.0))


def phi_unique(u: int, s: int) -> float:
    return 0.0 if s == 0 else u / s


def phi_nmss(stats: NeighborhoodStats, model: Model) -> float:
    if stats.ch_avg == 0:
        return 0.0
    n_types = len(model.constraint_types)
    if n_types == 0:
        return 0.0
    total = sum(v * v for v in stats.sat_min.values())
    return total / (n_types * model.decision_count * stats.ch_avg)


def phi_sat(stats: NeighborhoodStats, model: Model) -> float:
    n_types = len(model.constraint_types)
    if n_types == 0:
        return 1.0
    nv = model.decision_count
    total = 0.0
    for t in stats.sat_min:
        total += 1.0 if stats.sat_min[t] == 1.0 else stats.sat_max[t] / nv
    return total / n_types


def phi_var(stats: NeighborhoodStats, params: FitnessParams) -> float:
    return _logistic(-params.alpha_v * (-stats.ch_stdev + params.beta_v))


# ---------------------------------------------------------------------------
# Composite fitness specification
# ---------------------------------------------------------------------------


def _compile(expr: str) -> Callable[[dict[str, float]], float]:
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise FitnessSpecError(f"cannot parse fitness expression {expr!r}: {exc.msg}") from None

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Add, ast.Mult)):
            left, right = build(node.left), build(node.right)
            if isinstance(node.op, ast.Add):
                return lambda c: left(c) + right(c)
            return lambda c: left(c) * right(c)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            v = float(node.value)
            if not math.isfinite(v):
                raise FitnessSpecError("weights must be finite")
            return lambda c: v
        if isinstance(node, ast.Name):
            name = node.id
            if name == "amount":
                raise FitnessSpecError(
                    "component 'amount' has no definition and is not supported; "
                    "drop the term from the expression"
                )
            if name not in COMPONENTS:
                raise FitnessSpecError(f"unknown component {name!r}; expected one of {COMPONENTS}")
            return lambda c: c[name]
        raise FitnessSpecError(
            f"unsupported syntax in fitness expression: {ast.dump(node)[:40]}; "
            "only '+', '*', numbers and component names are allowed"
        )

    return build(tree)


@dataclass(frozen=True)
class FitnessSpec:
    expression: str
    params: FitnessParams = field(default_factory=FitnessParams)

    def __post_init__(self):
        object.__setattr__(self, "_fn", _compile(self.expression))

    def __reduce__(self):
        # the compiled closure is rebuilt rather than pickled
        return (FitnessSpec, (self.expression, self.params))

    def combine(self, components: dict[str, float]) -> float:
        return self._fn(components)

    def to_text(self) -> str:
        p = self.params
        lines = [f"alpha_s = {p.alpha_s!r}"]
        if p.beta_s is not None:
            lines.append(f"beta_s = {p.beta_s!r}")
        lines += [f"alpha_v = {p.alpha_v!r}", f"beta_v = {p.beta_v!r}", f"expression = {self.expression}"]
        return "\n".join(lines) + "\n"


def parse_fitness_spec(text: str) -> FitnessSpec:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FitnessSpecError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in ("alpha_s", "beta_s", "alpha_v", "beta_v", "expression"):
            raise FitnessSpecError(f"line {lineno}: unknown key {key!r}")
        values[key] = val
    if "expression" not in values:
        raise FitnessSpecError("missing 'expression' line")
    try:
        nums = {k: float(v) for k, v in values.items() if k != "expression"}
    except ValueError as exc:
        raise FitnessSpecError(str(exc)) from None
    return FitnessSpec(values["expression"], FitnessParams(**nums))


PRESETS = ("2opt", "3opt", "3swap")


def preset(name: str) -> FitnessSpec:
    """Shipped composites: ``2opt``, ``3opt`` and ``3swap``."""
    if name not in PRESETS:
        raise FitnessSpecError(f"unknown preset {name!r}; choose from {PRESETS}")
    text = resources.files("ndlgen.data.fitness").joinpath(f"{name}.fit").read_text()
    return parse_fitness_spec(text)


# ---------------------------------------------------------------------------
# Operator evaluation
# ---------------------------------------------------------------------------


@dataclass
class FitnessRecord:
    components: list[dict[str, float]]
    composite: float
    stats: list[NeighborhoodStats]
    static: StaticReport
    truncated: bool = False
    type_ok: bool = True


def components_for(
    stats: NeighborhoodStats, model: Model, static: StaticReport, params: FitnessParams
) -> dict[str, float]:
    comps = {"code": static.phi_code}
    if stats.size_s == 0:
        comps.update({k: 0.0 for k in NEIGHBORHOOD_COMPONENTS})
        return comps
    comps["nmss"] = phi_nmss(stats, model)
    comps["sat"] = phi_sat(stats, model)
    comps["size"] = phi_size(stats.unique_u, params)
    comps["unique"] = phi_unique(stats.unique_u, stats.size_s)
    comps["var"] = phi_var(stats, params)
    return comps


def evaluate_operator(
    model: Model,
    program: Program,
    tests: Sequence[Configuration],
    budget: ExecBudget | None = None,
    spec: FitnessSpec | None = None,
) -> FitnessRecord:
    """Static analysis, pruning, enumeration on every test configuration,
    then the composite averaged over tests."""
    if not tests:
        raise ValueError("at least one test configuration is required")
    spec = spec or preset("2opt")
    params = spec.params.resolve(model)
    budget = budget or ExecBudget()
    static = analyze(model, program)
    type_ok = type_check(model, program).ok
    core = None
    if type_ok:
        try:
            core = prune_introns(program, static)
        except EmptyCore:
            core = None
    rows, all_stats, truncated = [], [], False
    for start in tests:
        if core is None:
            ns = NeighborSet()
        else:
            ns = enumerate_neighbors(model, core, start, budget, check_pruned=False)
        truncated |= ns.truncated
        stats = neighborhood_stats(model, start, ns)
        comps = components_for(stats, model, static, params)
        comps["composite"] = spec.combine(comps)
        rows.append(comps)
        all_stats.append(stats)
    composite = float(np.mean([r["composite"] for r in rows]))
    return FitnessRecord(rows, composite, all_stats, static, truncated, type_ok)
