"""Nondeterministic interpreter enumerating an operator's neighborhood.

Execution is depth-first with backtracking, written in continuation-passing
style: every atom hands each of its solutions to the rest of the program.
Combinator bodies are applied deterministically, one step at a time, using
the first solution of the body; a body without solutions ends the
combinator's iteration.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterator

from .analysis import analyze
from .errors import DomainViolation, UnprunedProgram
from .lang import Atom, Program, type_check
from .tcg import PREDICATES, Configuration, Model, VarId, check_edge, propagate

# working configuration: decision arrays only, in model.decision_types order
Work = tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class ExecBudget:
    max_neighbors: int = 10_000
    max_steps: int = 1_000_000
    max_branch_depth: int = 256

    def __post_init__(self):
        if min(self.max_neighbors, self.max_steps, self.max_branch_depth) <= 0:
            raise ValueError("budgets must be positive")


@dataclass
class NeighborSet:
    neighbors: list[Configuration] = field(default_factory=list)
    truncated: bool = False
    steps_used: int = 0
    final: list[bool] = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.neighbors)

    @property
    def unique(self) -> int:
        return len(set(self.neighbors))

    def final_neighbors(self) -> list[Configuration]:
        """Emissions that are the last state of their top-level branch."""
        return [n for n, f in zip(self.neighbors, self.final) if f]


class _Stop(Exception):
    pass


class _Found(Exception):
    pass


def apply_modifier(model: Model, config: Configuration, modifier: Atom, bindings: dict) -> Configuration:
    """Apply one modifier atom to a full configuration (derived arrays are
    re-propagated).  Raises :class:`DomainViolation` on an out-of-domain value."""
    interp = _Interpreter(model, ExecBudget(), {})
    work = interp.to_work(config)
    new = interp.modify(modifier, bindings, work)
    if new is None:
        raise DomainViolation(f"{modifier.op} assigns a value outside the domain")
    return interp.to_config(new)


class _Interpreter:
    def __init__(self, model: Model, budget: ExecBudget, ref_types: dict[str, str | None]):
        self.model = model
        self.budget = budget
        self.ref_types = ref_types
        self.types = model.decision_types
        self.slot = {t.name: k for k, t in enumerate(self.types)}
        self.domains = {t.name: frozenset(t.domain) for t in self.types}
        self.steps = 0
        self.out = NeighborSet()
        self.start: Work = ()

    # -- configuration helpers -------------------------------------------

    def to_work(self, config: Configuration) -> Work:
        return tuple(tuple(config[t.name]) for t in self.types)

    def to_config(self, work: Work) -> Configuration:
        arrays = []
        for t in self.model.variable_types:
            if t.derived:
                arrays.append((t.name, (None,) * len(t)))
            else:
                arrays.append((t.name, work[self.slot[t.name]]))
        return propagate(self.model, Configuration(tuple(arrays)))

    def get(self, work: Work, var: VarId) -> int:
        t = self.model.var(var[0])
        return work[self.slot[var[0]]][t.position[var[1]]]

    def put(self, work: Work, var: VarId, value: int) -> Work | None:
        t = self.model.var(var[0])
        if value not in self.domains[var[0]]:
            return None
        k = self.slot[var[0]]
        arr = list(work[k])
        arr[t.position[var[1]]] = value
        return work[:k] + (tuple(arr),) + work[k + 1 :]

    def emit(self, work: Work, final: bool) -> int:
        if len(self.out.neighbors) >= self.budget.max_neighbors:
            self.out.truncated = True
            raise _Stop
        self.out.neighbors.append(self.to_config(work))
        self.out.final.append(final)
        return len(self.out.neighbors) - 1

    def tick(self):
        self.steps += 1
        if self.steps > self.budget.max_steps:
            self.out.truncated = True
            raise _Stop

    # -- entry -----------------------------------------------------------

    def run(self, program: Program, start: Configuration) -> NeighborSet:
        self.start = self.to_work(start)

        def finish(env, work, last):
            if last is None:
                if work != self.start:
                    self.emit(work, True)
            elif work != last[0]:
                self.emit(work, True)
            else:
                self.out.final[last[1]] = True

        try:
            self.solve(program.atoms, 0, {}, self.start, None, finish, 0)
        except _Stop:
            pass
        self.out.steps_used = min(self.steps, self.budget.max_steps)
        return self.out

    # -- core ------------------------------------------------------------

    def solve(self, atoms, i: int, env: dict, work: Work, last, k: Callable, depth: int):
        if i == len(atoms):
            return k(env, work, last)
        self.tick()
        atom = atoms[i]
        cat = atom.category
        if cat == "selector":
            sols = list(self.select(atom, env, work))
            if len(sols) > 1:
                depth += 1
                if depth > self.budget.max_branch_depth:
                    self.out.truncated = True
                    return
            for env2 in sols:
                self.solve(atoms, i + 1, env2, work, last, k, depth)
        elif cat == "filter":
            if self.test(atom, env, work):
                self.solve(atoms, i + 1, env, work, last, k, depth)
        elif cat == "modifier":
            new = self.modify(atom, env, work)
            if new is not None:
                self.solve(atoms, i + 1, env, new, last, k, depth)
        else:
            work, last = self.combine(atom, env, work, last)
            self.solve(atoms, i + 1, env, work, last, k, depth)

    def run_body(self, body: Program, env: dict, work: Work) -> Work | None:
        found: list[Work] = []

        def first(env2, work2, last2):
            found.append(work2)
            raise _Found

        try:
            self.solve(body.atoms, 0, env, work, None, first, 0)
        except _Found:
            return found[0]
        return None

    # -- selectors -------------------------------------------------------

    def _candidate_types(self, ref: str):
        t = self.ref_types.get(ref)
        if t is not None:
            return [self.model.var(t)]
        return list(self.types)

    def select(self, atom: Atom, env: dict, work: Work) -> Iterator[dict]:
        op = atom.op
        if op == "constraint":
            a, b = (r.text for r in atom.refs)
            c = self.model.constraint(atom.name)
            if a in env:
                edges = c.out_edges.get(env[a], ())
            elif b in env:
                edges = c.in_edges.get(env[b], ())
            else:
                edges = c.edges
            for u, v in edges:
                if a == b and u != v:
                    continue
                if a in env and env[a] != u or b in env and env[b] != v:
                    continue
                yield {**env, a: u, b: v}
        elif op == "variable":
            i, t = (r.text for r in atom.refs)
            if t in env:
                var = env[t]
                if i in env:
                    if env[i] == var[1]:
                        yield env
                else:
                    yield {**env, i: var[1]}
                return
            for ty in self._candidate_types(t):
                if i in env:
                    if env[i] in ty.position:
                        yield {**env, t: (ty.name, env[i])}
                else:
                    for idx in ty.index_set:
                        yield {**env, i: idx, t: (ty.name, idx)}
        elif op == "value":
            t, d = (r.text for r in atom.refs)
            if t in env:
                val = self.get(work, env[t])
                if d in env:
                    if env[d] == val:
                        yield env
                else:
                    yield {**env, d: val}
                return
            for ty in self._candidate_types(t):
                arr = work[self.slot[ty.name]]
                for idx, val in zip(ty.index_set, arr):
                    if d in env and env[d] != val:
                        continue
                    yield {**env, t: (ty.name, idx), d: val}
        elif op == "constant":
            (d,) = (r.text for r in atom.refs)
            vals = self.model.constant(atom.name).values
            if d in env:
                if env[d] in vals:
                    yield env
            else:
                for v in vals:
                    yield {**env, d: v}
        else:
            raise AssertionError(op)

    # -- filters ---------------------------------------------------------

    def test(self, atom: Atom, env: dict, work: Work) -> bool:
        op = atom.op
        if op in ("is_satisfied", "is_violated"):
            a, b = (env[r.text] for r in atom.refs)
            c = self.model.constraint(atom.name)
            if (a, b) not in c.edge_set:
                return False
            if atom.name in self.model.touches_derived:
                holds = check_edge(self.model, atom.name, (a, b), self.to_config(work))
            else:
                pred, _, _ = PREDICATES[c.predicate]
                holds = bool(pred(self.get(work, a), self.get(work, b), a[1], b[1]))
            return holds if op == "is_satisfied" else not holds
        x, y = (env[r.text] for r in atom.refs)
        if op == "eq":
            return x == y
        if op == "neq":
            return x != y
        return x < y

    # -- modifiers -------------------------------------------------------

    def modify(self, atom: Atom, env: dict, work: Work) -> Work | None:
        op = atom.op
        if op == "set":
            t, d = (env[r.text] for r in atom.refs)
            return self.put(work, t, d)
        if op == "swap":
            a, b = (env[r.text] for r in atom.refs)
            va, vb = self.get(work, a), self.get(work, b)
            new = self.put(work, a, vb)
            return None if new is None else self.put(new, b, va)
        t, d1, d2 = (env[r.text] for r in atom.refs)
        cur = self.get(work, t)
        return self.put(work, t, d2 if cur == d1 else d1)

    # -- combinators -----------------------------------------------------

    def _step(self, atom: Atom, env: dict, work: Work, last):
        """Apply the body once; returns (work, last, keep_going)."""
        new = self.run_body(atom.body, env, work)
        if new is None:
            return work, last, False
        if new != work:
            idx = self.emit(new, False)
            last = (new, idx)
        return new, last, True

    def combine(self, atom: Atom, env: dict, work: Work, last):
        op = atom.op
        if op == "for_each":
            for env2 in list(self.select(atom.selector, env, work)):
                work, last, go = self._step(atom, env2, work, last)
                if not go:
                    break
            return work, last
        p, q = (r.text for r in atom.pair)
        start = env[atom.refs[0].text]
        if op in ("bfs_over", "bfs_over_inverted"):
            c = self.model.constraint(atom.name)
            forward = op == "bfs_over"
            adj = c.out_edges if forward else c.in_edges
            seen = {start}
            queue = deque([start])
            while queue:
                node = queue.popleft()
                for e in adj.get(node, ()):
                    work, last, go = self._step(atom, {**env, p: e[0], q: e[1]}, work, last)
                    if not go:
                        return work, last
                    nxt = e[1] if forward else e[0]
                    if nxt not in seen:
                        seen.add(nxt)
                        queue.append(nxt)
            return work, last
        # iterate / iterate_reversed walk the chain of the configuration
        # as it was when the combinator was entered
        ty = self.model.var(start[0])
        snap = work[self.slot[ty.name]]
        if op == "iterate":
            def successor(var):
                val = snap[ty.position[var[1]]]
                return (ty.name, val) if val in ty.position else None
        else:
            pred: dict[int, int] = {}
            for idx, val in zip(ty.index_set, snap):
                pred.setdefault(val, idx)

            def successor(var):
                idx = pred.get(var[1])
                return None if idx is None else (ty.name, idx)

        cur = start
        seen = {cur}
        while True:
            self.tick()
            nxt = successor(cur)
            if nxt is None or nxt in seen:
                break
            seen.add(nxt)
            work, last, go = self._step(atom, {**env, p: cur, q: nxt}, work, last)
            if not go:
                break
            cur = nxt
        return work, last


def enumerate_neighbors(
    model: Model,
    program: Program,
    start: Configuration,
    budget: ExecBudget | None = None,
    *,
    check_pruned: bool = True,
) -> NeighborSet:
    """Enumerate the neighborhood of ``start`` under a pruned program."""
    if check_pruned and analyze(model, program).introns:
        raise UnprunedProgram("prune introns before execution")
    report = type_check(model, program)
    interp = _Interpreter(model, budget or ExecBudget(), report.ref_types)
    return interp.run(program, start)
