"""Traveling salesman model with the circuit constraint decomposed into
binary constraints over ``next`` and a derived ``order`` array."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import InvalidSize, ModelError
from .lang import Program, parse_operator
from .tcg import (
    ConstraintTypeDecl,
    Configuration,
    DerivedRule,
    Model,
    VariableTypeDecl,
    build_model,
)

#: Seeds used to generate the shipped instance files.
INSTANCE_SEEDS = {"tsp6": (0, 1), "tsp7": (2, 3)}

REFERENCE_OPERATORS = ("2opt", "2opt_raw", "3opt_basic", "even_swap")


def tsp_model(n: int) -> Model:
    if n < 3:
        raise InvalidSize(f"a tour needs at least 3 cities, got {n}")
    cities = tuple(range(1, n + 1))
    nxt = VariableTypeDecl("next", cities, cities)
    order = VariableTypeDecl("order", cities, cities, DerivedRule("circuit_order", "next"))
    pairs = tuple((i, j) for i in cities for j in cities if i != j)
    return build_model(
        [nxt, order],
        [
            ConstraintTypeDecl("all_diff_next", "neq_values", tuple((("next", i), ("next", j)) for i, j in pairs)),
            ConstraintTypeDecl("all_diff_order", "neq_values", tuple((("order", i), ("order", j)) for i, j in pairs)),
            ConstraintTypeDecl("self_diff_next", "neq_value_index", tuple((("next", i), ("next", i)) for i in cities)),
        ],
    )


def tour_config(model: Model, nxt) -> Configuration:
    return model.configuration({"next": list(nxt)})


def is_single_cycle(nxt) -> bool:
    n = len(nxt)
    seen, cur = set(), 1
    for _ in range(n):
        if cur in seen or not 1 <= cur <= n:
            return False
        seen.add(cur)
        cur = nxt[cur - 1]
    return cur == 1 and len(seen) == n


def random_tour(n: int, seed, model: Model | None = None) -> Configuration:
    """Uniformly random single-cycle ``next`` assignment."""
    model = model or tsp_model(n)
    perm = np.random.default_rng(seed).permutation(n) + 1
    nxt = [0] * n
    for k in range(n):
        nxt[perm[k] - 1] = int(perm[(k + 1) % n])
    return tour_config(model, nxt)


@dataclass(frozen=True)
class TspInstance:
    n_cities: int
    initial_tours: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        for t in self.initial_tours:
            if len(t) != self.n_cities or not is_single_cycle(t):
                raise ModelError(f"tour {list(t)} is not a single cycle over {self.n_cities} cities")

    def model(self) -> Model:
        return tsp_model(self.n_cities)

    def configurations(self, model: Model | None = None) -> list[Configuration]:
        model = model or self.model()
        return [tour_config(model, t) for t in self.initial_tours]


def parse_instance(text: str) -> TspInstance:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ModelError("empty instance file")
    try:
        n = int(lines[0])
        tours = tuple(tuple(int(x) for x in ln.split()) for ln in lines[1:])
    except ValueError as exc:
        raise ModelError(f"malformed instance file: {exc}") from None
    return TspInstance(n, tours)


def format_instance(inst: TspInstance) -> str:
    rows = [str(inst.n_cities)] + [" ".join(map(str, t)) for t in inst.initial_tours]
    return "\n".join(rows) + "\n"


def make_instance(n: int, seeds) -> TspInstance:
    model = tsp_model(n)
    return TspInstance(n, tuple(random_tour(n, s, model)["next"] for s in seeds))


def load_instance(name: str) -> TspInstance:
    """Load a shipped instance (``tsp6`` or ``tsp7``)."""
    text = resources.files("ndlgen.data.instances").joinpath(f"{name}.txt").read_text()
    return parse_instance(text)


def reference_operators() -> dict[str, Program]:
    ops = {}
    pkg = resources.files("ndlgen.data.operators")
    for name in REFERENCE_OPERATORS:
        ops[name] = parse_operator(pkg.joinpath(f"{name}.ndl").read_text())
    return ops

