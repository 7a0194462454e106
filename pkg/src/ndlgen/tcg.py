"""Typed Constraint Graph: variable arrays, typed binary constraint edges,
derived variables and configurations evaluated against them.

Variables are identified by ``(type_name, index)`` pairs.  Constraint edges
are directed; a unary constraint is a self-loop edge.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

from .errors import (
    DuplicateName,
    EmptyDomain,
    ModelError,
    ModelMismatch,
    UnknownConstraintType,
    UnknownVariableRef,
)

VarId = tuple[str, int]
Edge = tuple[VarId, VarId]

#: Marker stored for a derived variable whose rule cannot assign it.
UNDEFINED = None


@dataclass(frozen=True)
class DerivedRule:
    kind: str
    source: str

    def __str__(self) -> str:
        return f"{self.kind}({self.source})"


@dataclass(frozen=True)
class VariableTypeDecl:
    name: str
    index_set: tuple[int, ...]
    domain: tuple[int, ...]
    derivation_rule: DerivedRule | None = None

    @property
    def derived(self) -> bool:
        return self.derivation_rule is not None

    @cached_property
    def self_indexed(self) -> bool:
        return set(self.domain) == set(self.index_set)

    @cached_property
    def position(self) -> dict[int, int]:
        return {idx: pos for pos, idx in enumerate(self.index_set)}

    def __len__(self) -> int:
        return len(self.index_set)


@dataclass(frozen=True)
class ConstraintTypeDecl:
    name: str
    predicate: str
    edges: tuple[Edge, ...]

    @cached_property
    def endpoint_types(self) -> tuple[str, str] | None:
        """``(source type, target type)`` if every edge agrees, else None."""
        kinds = {(a[0], b[0]) for a, b in self.edges}
        return next(iter(kinds)) if len(kinds) == 1 else None

    @cached_property
    def edge_set(self) -> frozenset[Edge]:
        return frozenset(self.edges)

    @cached_property
    def out_edges(self) -> dict[VarId, list[Edge]]:
        out: dict[VarId, list[Edge]] = {}
        for e in self.edges:
            out.setdefault(e[0], []).append(e)
        return out

    @cached_property
    def in_edges(self) -> dict[VarId, list[Edge]]:
        inc: dict[VarId, list[Edge]] = {}
        for e in self.edges:
            inc.setdefault(e[1], []).append(e)
        return inc


@dataclass(frozen=True)
class ConstantSetDecl:
    name: str
    values: tuple[int, ...]


def _neq_values(va, vb, ia, ib):
    return va != vb


def _eq_values(va, vb, ia, ib):
    return va == vb


def _lt_values(va, vb, ia, ib):
    return va < vb


def _neq_value_index(va, vb, ia, ib):
    return va != ib


# (predicate, reads value of A, reads value of B)
PREDICATES: dict[str, tuple[Callable[[int, int, int, int], bool], bool, bool]] = {
    "neq_values": (_neq_values, True, True),
    "eq_values": (_eq_values, True, True),
    "lt_values": (_lt_values, True, True),
    "neq_value_index": (_neq_value_index, True, False),
}

DERIVATION_RULES = ("circuit_order",)


@dataclass(frozen=True)
class Configuration:
    """Assignment of every variable array, in model declaration order.

    Derived arrays may hold :data:`UNDEFINED` entries.
    """

    arrays: tuple[tuple[str, tuple[int | None, ...]], ...]

    @cached_property
    def _by_name(self) -> dict[str, tuple[int | None, ...]]:
        return dict(self.arrays)

    def __getitem__(self, name: str) -> tuple[int | None, ...]:
        return self._by_name[name]

    def names(self) -> list[str]:
        return [n for n, _ in self.arrays]

    def replace(self, **arrays: Sequence[int | None]) -> "Configuration":
        return Configuration(
            tuple((n, tuple(arrays[n]) if n in arrays else v) for n, v in self.arrays)
        )

    def decision_key(self, model: "Model") -> tuple[tuple[int | None, ...], ...]:
        return tuple(self[t.name] for t in model.decision_types)


@dataclass(frozen=True, eq=False)
class Model:
    variable_types: tuple[VariableTypeDecl, ...]
    constraint_types: tuple[ConstraintTypeDecl, ...]
    constants: tuple[ConstantSetDecl, ...] = ()
    _vars: dict[str, VariableTypeDecl] = field(init=False, repr=False)
    _cons: dict[str, ConstraintTypeDecl] = field(init=False, repr=False)
    _consts: dict[str, ConstantSetDecl] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_vars", {v.name: v for v in self.variable_types})
        object.__setattr__(self, "_cons", {c.name: c for c in self.constraint_types})
        object.__setattr__(self, "_consts", {c.name: c for c in self.constants})

    def var(self, name: str) -> VariableTypeDecl:
        try:
            return self._vars[name]
        except KeyError:
            raise UnknownVariableRef(f"unknown variable type {name!r}") from None

    def constraint(self, name: str) -> ConstraintTypeDecl:
        try:
            return self._cons[name]
        except KeyError:
            raise UnknownConstraintType(f"unknown constraint type {name!r}") from None

    def constant(self, name: str) -> ConstantSetDecl:
        try:
            return self._consts[name]
        except KeyError:
            raise ModelError(f"unknown constant set {name!r}") from None

    def has_var(self, name: str) -> bool:
        return name in self._vars

    def has_constraint(self, name: str) -> bool:
        return name in self._cons

    def has_constant(self, name: str) -> bool:
        return name in self._consts

    @cached_property
    def decision_types(self) -> tuple[VariableTypeDecl, ...]:
        return tuple(v for v in self.variable_types if not v.derived)

    @cached_property
    def derived_types(self) -> tuple[VariableTypeDecl, ...]:
        return tuple(v for v in self.variable_types if v.derived)

    @cached_property
    def decision_count(self) -> int:
        return sum(len(v) for v in self.decision_types)

    @cached_property
    def touches_derived(self) -> frozenset[str]:
        """Constraint types with at least one endpoint on a derived array."""
        derived = {v.name for v in self.derived_types}
        return frozenset(
            c.name
            for c in self.constraint_types
            if any(a[0] in derived or b[0] in derived for a, b in c.edges)
        )

    def value(self, config: Configuration, var: VarId) -> int | None:
        t = self._vars[var[0]]
        return config[var[0]][t.position[var[1]]]

    def configuration(self, assignment: Mapping[str, Sequence[int]]) -> Configuration:
        """Build a propagated configuration from decision-array values."""
        arrays = []
        for t in self.variable_types:
            if t.derived:
                arrays.append((t.name, (UNDEFINED,) * len(t)))
                continue
            if t.name not in assignment:
                raise ModelError(f"missing values for variable type {t.name!r}")
            vals = tuple(int(v) for v in assignment[t.name])
            if len(vals) != len(t):
                raise ModelError(
                    f"{t.name}: expected {len(t)} values, got {len(vals)}"
                )
            dom = set(t.domain)
            bad = [v for v in vals if v not in dom]
            if bad:
                raise ModelError(f"{t.name}: values {bad} outside domain")
            arrays.append((t.name, vals))
        extra = set(assignment) - {t.name for t in self.decision_types}
        if extra:
            raise ModelError(f"unknown or derived arrays in assignment: {sorted(extra)}")
        return propagate(self, Configuration(tuple(arrays)))


def _check_unique(names: Iterable[str], what: str) -> None:
    seen = set()
    for n in names:
        if n in seen:
            raise DuplicateName(f"duplicate {what} name {n!r}")
        seen.add(n)


def build_model(
    variable_types: Sequence[VariableTypeDecl],
    constraint_types: Sequence[ConstraintTypeDecl] = (),
    constants: Sequence[ConstantSetDecl] = (),
) -> Model:
    """Validate declarations and assemble a :class:`Model`."""
    _check_unique((v.name for v in variable_types), "variable type")
    _check_unique((c.name for c in constraint_types), "constraint type")
    _check_unique((c.name for c in constants), "constant set")
    vars_ = {v.name: v for v in variable_types}
    for v in variable_types:
        if not v.index_set:
            raise EmptyDomain(f"variable type {v.name!r} has an empty index set")
        if not v.domain:
            raise EmptyDomain(f"variable type {v.name!r} has an empty domain")
        if len(set(v.index_set)) != len(v.index_set):
            raise ModelError(f"variable type {v.name!r} repeats an index")
        rule = v.derivation_rule
        if rule is not None:
            if rule.kind not in DERIVATION_RULES:
                raise ModelError(f"unknown derivation rule {rule.kind!r}")
            src = vars_.get(rule.source)
            if src is None:
                raise UnknownVariableRef(
                    f"derived type {v.name!r} refers to unknown array {rule.source!r}"
                )
            if src.derived or not src.self_indexed or len(src) != len(v):
                raise ModelError(
                    f"circuit_order source {src.name!r} must be a self-indexed "
                    f"decision array of the same length as {v.name!r}"
                )
    for c in constraint_types:
        if c.predicate not in PREDICATES:
            raise ModelError(f"unknown predicate {c.predicate!r} in {c.name!r}")
        for a, b in c.edges:
            for name, idx in (a, b):
                t = vars_.get(name)
                if t is None or idx not in t.position:
                    raise UnknownVariableRef(
                        f"constraint {c.name!r} references undeclared variable {name}[{idx}]"
                    )
    for k in constants:
        if not k.values:
            raise EmptyDomain(f"constant set {k.name!r} is empty")
    return Model(tuple(variable_types), tuple(constraint_types), tuple(constants))


def _circuit_order(source: Sequence[int | None], src_type: VariableTypeDecl) -> list[int | None]:
    n = len(source)
    out: list[int | None] = [UNDEFINED] * n
    cur = src_type.index_set[0]
    seen = {cur}
    out[0] = cur
    for k in range(1, n):
        nxt = source[src_type.position[cur]]
        if nxt is None or nxt not in src_type.position or nxt in seen:
            break
        out[k] = nxt
        seen.add(nxt)
        cur = nxt
    return out


def propagate(model: Model, config: Configuration) -> Configuration:
    """Recompute derived arrays from their rules, in declaration order."""
    arrays = dict(config.arrays)
    for t in model.derived_types:
        rule = t.derivation_rule
        src = model.var(rule.source)
        arrays[t.name] = tuple(_circuit_order(arrays[src.name], src))
    return Configuration(tuple((t.name, arrays[t.name]) for t in model.variable_types))


def check_edge(model: Model, ctype: str, edge: Edge, config: Configuration) -> bool:
    """True iff the constraint on ``edge`` holds; undefined operands violate."""
    c = model.constraint(ctype)
    pred, reads_a, reads_b = PREDICATES[c.predicate]
    (ta, ia), (tb, ib) = edge
    va = model.value(config, edge[0])
    vb = model.value(config, edge[1])
    if (reads_a and va is None) or (reads_b and vb is None):
        return False
    return bool(pred(va, vb, ia, ib))


def satisfied_ratio(model: Model, ctype: str, config: Configuration) -> float:
    c = model.constraint(ctype)
    if not c.edges:
        return 1.0
    ok = sum(check_edge(model, ctype, e, config) for e in c.edges)
    return ok / len(c.edges)


def diff_ratio(a: Configuration, b: Configuration, model: Model) -> float:
    """Share of decision variables whose values differ between ``a`` and ``b``."""
    names = [t.name for t in model.variable_types]
    if a.names() != names or b.names() != names:
        raise ModelMismatch("configurations do not belong to this model")
    diff = 0
    for t in model.decision_types:
        xa, xb = a[t.name], b[t.name]
        if len(xa) != len(t) or len(xb) != len(t):
            raise ModelMismatch(f"array {t.name!r} has the wrong length")
        diff += sum(1 for u, v in zip(xa, xb) if u != v)
    return diff / model.decision_count


# ---------------------------------------------------------------------------
# Model file format
# ---------------------------------------------------------------------------

_SECTION = re.compile(r"^(vars|constraints|constants)\s*:?\s*$")
_VAR_LINE = re.compile(
    r"^(?P<name>[A-Za-z_]\w*)\s+(?P<index>\S+)\s+in\s+(?P<domain>\S+)"
    r"(?:\s+derived\s+(?P<rule>[A-Za-z_]\w*)\(\s*(?P<src>[A-Za-z_]\w*)\s*\))?\s*$"
)
_CON_LINE = re.compile(
    r"^(?P<name>[A-Za-z_]\w*)\s+(?P<pred>[A-Za-z_]\w*)\s+"
    r"(?P<gen>all_pairs|self_loop)\(\s*(?P<arr>[A-Za-z_]\w*)\s*\)\s*$"
)
_CONST_LINE = re.compile(r"^(?P<name>[A-Za-z_]\w*)\s+(?P<vals>-?\d+(?:[\s,]+-?\d+)*)\s*$")


def _parse_int_set(text: str, lineno: int) -> tuple[int, ...]:
    m = re.fullmatch(r"(-?\d+)\.\.(-?\d+)", text)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        if hi < lo:
            raise EmptyDomain(f"line {lineno}: empty range {text}")
        return tuple(range(lo, hi + 1))
    if re.fullmatch(r"-?\d+(,-?\d+)*", text):
        return tuple(sorted(set(int(x) for x in text.split(","))))
    raise ModelError(f"line {lineno}: expected 'a..b' or a comma list, got {text!r}")


def _edges_for(gen: str, t: VariableTypeDecl) -> tuple[Edge, ...]:
    idx = t.index_set
    if gen == "self_loop":
        return tuple(((t.name, i), (t.name, i)) for i in idx)
    return tuple(((t.name, i), (t.name, j)) for i in idx for j in idx if i != j)


def parse_model(text: str) -> Model:
    """Parse the line-oriented model format (see README)."""
    section = None
    vars_: list[VariableTypeDecl] = []
    pending_cons: list[tuple[str, str, str, str, int]] = []
    consts: list[ConstantSetDecl] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION.match(line)
        if m:
            section = m.group(1)
            continue
        if section is None:
            raise ModelError(f"line {lineno}: content before any section header")
        if section == "vars":
            m = _VAR_LINE.match(line)
            if not m:
                raise ModelError(f"line {lineno}: malformed variable declaration {line!r}")
            rule = None
            if m.group("rule"):
                rule = DerivedRule(m.group("rule"), m.group("src"))
            vars_.append(
                VariableTypeDecl(
                    m.group("name"),
                    _parse_int_set(m.group("index"), lineno),
                    _parse_int_set(m.group("domain"), lineno),
                    rule,
                )
            )
        elif section == "constraints":
            m = _CON_LINE.match(line)
            if not m:
                raise ModelError(f"line {lineno}: malformed constraint declaration {line!r}")
            pending_cons.append(
                (m.group("name"), m.group("pred"), m.group("gen"), m.group("arr"), lineno)
            )
        else:
            m = _CONST_LINE.match(line)
            if not m:
                raise ModelError(f"line {lineno}: malformed constant declaration {line!r}")
            vals = tuple(int(x) for x in re.split(r"[\s,]+", m.group("vals").strip()))
            consts.append(ConstantSetDecl(m.group("name"), vals))
    by_name = {v.name: v for v in vars_}
    cons = []
    for name, pred, gen, arr, lineno in pending_cons:
        if arr not in by_name:
            raise UnknownVariableRef(f"line {lineno}: constraint {name!r} uses undeclared array {arr!r}")
        cons.append(ConstraintTypeDecl(name, pred, _edges_for(gen, by_name[arr])))
    return build_model(vars_, cons, consts)


def _fmt_set(values: Sequence[int]) -> str:
    lo, hi = min(values), max(values)
    if list(values) == list(range(lo, hi + 1)):
        return f"{lo}..{hi}"
    return ",".join(str(v) for v in values)


def format_model(model: Model) -> str:
    """Inverse of :func:`parse_model` for models built from edge generators."""
    lines = ["vars"]
    for t in model.variable_types:
        line = f"  {t.name} {_fmt_set(t.index_set)} in {_fmt_set(t.domain)}"
        if t.derivation_rule:
            line += f" derived {t.derivation_rule}"
        lines.append(line)
    lines.append("constraints")
    for c in model.constraint_types:
        names = {a[0] for a, _ in c.edges} | {b[0] for _, b in c.edges}
        if len(names) != 1:
            raise ModelError(f"constraint {c.name!r} has no generator form")
        t = model.var(names.pop())
        for gen in ("all_pairs", "self_loop"):
            if c.edges == _edges_for(gen, t):
                lines.append(f"  {c.name} {c.predicate} {gen}({t.name})")
                break
        else:
            raise ModelError(f"constraint {c.name!r} has no generator form")
    if model.constants:
        lines.append("constants")
        for k in model.constants:
            lines.append(f"  {k.name} {' '.join(str(v) for v in k.values)}")
    return "\n".join(lines) + "\n"
