"""Model-specific BNF grammar for operator programs, derivation trees,
position-independent grow sampling and sentence recognition.

Symbols are plain strings.  A symbol is a nonterminal exactly when it has
productions; everything else is a terminal and is copied verbatim into the
sentence, so the concatenated frontier of a derivation is operator source in
the single-line canonical form produced by :func:`ndlgen.lang.render_inline`.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from .errors import DepthInfeasible, NoModifiableVariables
from .lang import Program, render_inline
from .tcg import Model

START = "<program>"


@dataclass(frozen=True)
class GrammarOptions:
    n_global_refs: int = 4
    n_local_refs: int = 2
    local_scopes: bool = True
    symmetry_breaking: bool = True
    forbid_nested_combinators: bool = True
    max_depth: int = 90

    def __post_init__(self):
        if self.n_global_refs < 1:
            raise ValueError("n_global_refs must be positive")
        if self.local_scopes and self.n_local_refs < 1:
            raise ValueError("n_local_refs must be positive when local scopes are enabled")
        if self.max_depth < 1:
            raise ValueError("max_depth must be positive")


@dataclass(frozen=True)
class Grammar:
    productions: dict[str, tuple[tuple[str, ...], ...]]
    start: str = START
    min_depth: dict[str, int] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        prods = self.productions
        if self.start not in prods:
            raise ValueError(f"start symbol {self.start} has no productions")
        for nt, alts in prods.items():
            if not alts:
                raise ValueError(f"{nt} has no alternatives")
        object.__setattr__(self, "min_depth", _min_depths(prods))
        unproductive = set(prods) - set(self.min_depth)
        if unproductive:
            raise ValueError(f"nonterminals without terminal derivations: {sorted(unproductive)}")
        reach = {self.start}
        todo = [self.start]
        while todo:
            for alt in prods[todo.pop()]:
                for s in alt:
                    if s in prods and s not in reach:
                        reach.add(s)
                        todo.append(s)
        unreachable = set(prods) - reach
        if unreachable:
            raise ValueError(f"unreachable nonterminals: {sorted(unreachable)}")

    @property
    def nonterminals(self) -> frozenset[str]:
        return frozenset(self.productions)

    @property
    def terminals(self) -> frozenset[str]:
        return frozenset(s for alts in self.productions.values() for alt in alts for s in alt if s not in self.productions)

    def is_nonterminal(self, symbol: str) -> bool:
        return symbol in self.productions

    def alt_depth(self, alt: Sequence[str]) -> int:
        """Minimum depth of a subtree whose root uses ``alt``."""
        return 1 + max((self.min_depth[s] for s in alt if s in self.productions), default=0)

    def to_bnf(self) -> str:
        lines = []
        for nt, alts in self.productions.items():
            rendered = [" ".join(s if s in self.productions else _quote(s) for s in alt) for alt in alts]
            lines.append(f"{nt} ::= " + " | ".join(rendered))
        return "\n".join(lines) + "\n"


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


_BNF_SYMBOL = re.compile(r'\s*(?:(<[^<>\s]+>)|"((?:[^"\\]|\\.)*)"|(\|))')


def parse_bnf(text: str, start: str = START) -> Grammar:
    """Read the format written by :meth:`Grammar.to_bnf`."""
    prods: dict[str, tuple[tuple[str, ...], ...]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        lhs, sep, rhs = line.partition("::=")
        lhs = lhs.strip()
        if not sep or not re.fullmatch(r"<[^<>\s]+>", lhs):
            raise ValueError(f"line {lineno}: expected '<nt> ::= ...'")
        alts, cur, pos = [], [], 0
        while rhs[pos:].strip():
            m = _BNF_SYMBOL.match(rhs, pos)
            if not m:
                raise ValueError(f"line {lineno}: cannot read {rhs[pos:].strip()[:20]!r}")
            if m.group(3):
                alts.append(tuple(cur))
                cur = []
            elif m.group(1):
                cur.append(m.group(1))
            else:
                cur.append(re.sub(r"\\(.)", r"\1", m.group(2)))
            pos = m.end()
        alts.append(tuple(cur))
        prods[lhs] = tuple(alts)
    return Grammar(prods, start)


def _min_depths(prods) -> dict[str, int]:
    depth: dict[str, int] = {}
    changed = True
    while changed:
        changed = False
        for nt, alts in prods.items():
            best = None
            for alt in alts:
                kids = [s for s in alt if s in prods]
                if all(k in depth for k in kids):
                    d = 1 + max((depth[k] for k in kids), default=0)
                    best = d if best is None else min(best, d)
            if best is not None and depth.get(nt) != best:
                if nt not in depth or best < depth[nt]:
                    depth[nt] = best
                    changed = True
    return depth


# ---------------------------------------------------------------------------
# Grammar generation
# ---------------------------------------------------------------------------


class _Builder:
    def __init__(self, model: Model, options: GrammarOptions):
        self.model = model
        self.opt = options
        self.types = model.decision_types
        self.type_no = {t.name: k for k, t in enumerate(self.types)}
        self.prods: dict[str, list[tuple[str, ...]]] = {}
        self.constraints = [
            c for c in model.constraint_types
            if c.name not in model.touches_derived and all(model.has_var(t) for t in c.endpoint_types)
        ]

    def add(self, nt: str, alt: Sequence[str]):
        alts = self.prods.setdefault(nt, [])
        alt = tuple(alt)
        if alt not in alts:
            alts.append(alt)

    # -- ref families ------------------------------------------------------

    def index_kind(self, t: str) -> str:
        return "D" if self.model.var(t).self_indexed else "I"

    def global_ref(self, kind: str, t: str) -> str:
        nt = f"<{kind}_{t}>"
        if nt not in self.prods:
            base = self.type_no[t] * self.opt.n_global_refs
            for j in range(self.opt.n_global_refs):
                self.add(nt, [f"{kind}{base + j}"])
        return nt

    def local_ref(self, kind: str, t: str) -> str:
        if not self.opt.local_scopes:
            return self.global_ref(kind, t)
        nt = f"<L{kind}_{t}>"
        if nt not in self.prods:
            base = self.type_no[t] * self.opt.n_local_refs
            for j in range(self.opt.n_local_refs):
                self.add(nt, [f"L{kind}{base + j}"])
        return nt

    def ref(self, kind: str, t: str, body: bool) -> str:
        if not body or not self.opt.local_scopes:
            return self.global_ref(kind, t)
        nt = f"<b{kind}_{t}>"
        if nt not in self.prods:
            self.add(nt, [self.global_ref(kind, t)])
            self.add(nt, [self.local_ref(kind, t)])
        return nt

    # -- atom alternatives --------------------------------------------------

    def selectors(self, body: bool) -> list[tuple[str, ...]]:
        R = lambda k, t: self.ref(k, t, body)  # noqa: E731
        alts = []
        for c in self.constraints:
            a, b = c.endpoint_types
            alts.append((f"constraint({c.name}, ", R("T", a), ", ", R("T", b), ")"))
        for t in self.types:
            alts.append(("variable(", R(self.index_kind(t.name), t.name), ", ", R("T", t.name), ")"))
            alts.append(("value(", R("T", t.name), ", ", R("D", t.name), ")"))
        for cs in self.model.constants:
            for t in self.types:
                if set(cs.values) <= set(t.domain):
                    alts.append((f"constant({cs.name}, ", R("D", t.name), ")"))
        return alts

    def modifiers(self, body: bool) -> list[tuple[str, ...]]:
        alts = []
        for t in self.types:
            T, D = self.ref("T", t.name, body), self.ref("D", t.name, body)
            alts.append(("set(", T, ", ", D, ")"))
            alts.append(("swap(", T, ", ", T, ")"))
            alts.append(("flip(", T, ", ", D, ", ", D, ")"))
        return alts

    def filters(self, body: bool) -> list[tuple[str, ...]]:
        alts = []
        for c in self.constraints:
            a, b = c.endpoint_types
            for op in ("is_satisfied", "is_violated"):
                alts.append((f"{op}({c.name}, ", self.ref("T", a, body), ", ", self.ref("T", b, body), ")"))
        for t in self.types:
            T = self.ref("T", t.name, body)
            alts.append((T, " = ", T))
            alts.append((T, " != ", T))
            kinds = ["D"] if t.self_indexed else ["D", "I"]
            for k in kinds:
                X = self.ref(k, t.name, body)
                for sym in (" = ", " != ", " < "):
                    alts.append((X, sym, X))
        return alts

    def combinators(self, body: bool) -> list[tuple[str, ...]]:
        inner = ("(", "<body>", "))")
        alts = [("for_each(", "<body_selector>", ", ") + inner]
        for c in self.constraints:
            a, b = c.endpoint_types
            pair = (self.local_ref("T", a), "-", self.local_ref("T", b), ", ")
            alts.append((f"bfs_over({c.name}, ", self.ref("T", a, body), ", ") + pair + inner)
            alts.append((f"bfs_over_inverted({c.name}, ", self.ref("T", b, body), ", ") + pair + inner)
        for t in self.types:
            if t.self_indexed:
                L = self.local_ref("T", t.name)
                for op in ("iterate", "iterate_reversed"):
                    alts.append((f"{op}(", self.ref("T", t.name, body), ", ", L, "-", L, ", ") + inner)
        return alts

    def canonical(self, alt: tuple[str, ...]) -> tuple[str, ...]:
        """Replace global ref nonterminals by the lowest free ordinals."""
        used: dict[str, int] = {}
        out = []
        for s in alt:
            m = re.fullmatch(r"<([TDI])_(.+)>", s)
            if m is None:
                out.append(s)
                continue
            kind, t = m.groups()
            k = used.get(s, 0)
            used[s] = k + 1
            base = self.type_no[t] * self.opt.n_global_refs
            out.append(f"{kind}{base + min(k, self.opt.n_global_refs - 1)}")
        return tuple(out)

    def build(self) -> Grammar:
        cats = {
            "selector": self.selectors,
            "modifier": self.modifiers,
            "filter": self.filters,
            "combinator": self.combinators,
        }
        self.add(START, ["<first>"])
        self.add(START, ["<first>", ", ", "<atoms>"])
        self.add("<atoms>", ["<atom>"])
        self.add("<atoms>", ["<atom>", ", ", "<atoms>"])
        self.add("<body>", ["<body_atom>"])
        self.add("<body>", ["<body_atom>", ", ", "<body>"])
        for name, make in cats.items():
            top = make(False)
            self.add("<atom>", [f"<{name}>"])
            for alt in top:
                self.add(f"<{name}>", alt)
                self.add("<first>", self.canonical(alt) if self.opt.symmetry_breaking else alt)
            if name == "combinator" and self.opt.forbid_nested_combinators:
                continue
            self.add("<body_atom>", [f"<body_{name}>"])
            for alt in make(True):
                self.add(f"<body_{name}>", alt)
        if "<body_selector>" not in self.prods:
            for alt in self.selectors(True):
                self.add("<body_selector>", alt)
        # keep the start symbol first and the rest in a stable order
        order = [START, "<first>", "<atoms>", "<atom>", "<body>", "<body_atom>"]
        rest = [k for k in self.prods if k not in order]
        return Grammar({k: tuple(self.prods[k]) for k in order + rest})


def generate_grammar(model: Model, options: GrammarOptions | None = None) -> Grammar:
    """Grammar whose sentences are type-correct operators for ``model``.

    Derived variable types, and constraint types touching them, never appear.
    """
    if not model.decision_types:
        raise NoModifiableVariables("the model has no decision variables to modify")
    return _Builder(model, options or GrammarOptions()).build()


# ---------------------------------------------------------------------------
# Derivation trees
# ---------------------------------------------------------------------------

TreePath = tuple[int, ...]


@dataclass(frozen=True)
class Node:
    symbol: str
    choice: int
    children: tuple["Node | str", ...]
    depth: int = field(init=False, compare=False)
    size: int = field(init=False, compare=False)

    def __post_init__(self):
        kids = [c for c in self.children if isinstance(c, Node)]
        object.__setattr__(self, "depth", 1 + max((c.depth for c in kids), default=0))
        object.__setattr__(self, "size", 1 + sum(c.size for c in kids))

    def text(self) -> str:
        return "".join(_frontier(self))

    def nodes(self, prefix: TreePath = ()) -> Iterator[tuple[TreePath, "Node"]]:
        """Pre-order ``(path, node)`` over nonterminal nodes; a path indexes
        ``children`` at each level."""
        yield prefix, self
        for i, c in enumerate(self.children):
            if isinstance(c, Node):
                yield from c.nodes(prefix + (i,))

    def get(self, path: TreePath) -> "Node":
        node = self
        for i in path:
            node = node.children[i]
        return node

    def replace(self, path: TreePath, new: "Node") -> "Node":
        if not path:
            return new
        i = path[0]
        kids = list(self.children)
        kids[i] = kids[i].replace(path[1:], new)
        return Node(self.symbol, self.choice, tuple(kids))


def _frontier(node: Node) -> Iterator[str]:
    stack: list[Node | str] = [node]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            yield item
        else:
            stack.extend(reversed(item.children))


class _Open:
    __slots__ = ("symbol", "depth", "choice", "children")

    def __init__(self, symbol: str, depth: int):
        self.symbol = symbol
        self.depth = depth
        self.choice = -1
        self.children: list = []

    def freeze(self) -> Node:
        return Node(self.symbol, self.choice, tuple(c.freeze() if isinstance(c, _Open) else c for c in self.children))


def grow(grammar: Grammar, rng: random.Random, symbol: str = START, max_depth: int = 90) -> Node:
    """Position-independent grow: open nonterminals are expanded in random
    order, each picking uniformly among the alternatives that can still be
    completed within ``max_depth`` (the root counts as depth 1)."""
    if grammar.min_depth[symbol] > max_depth:
        raise DepthInfeasible(f"{symbol} needs depth {grammar.min_depth[symbol]}, bound is {max_depth}")
    root = _Open(symbol, 1)
    pending = [root]
    while pending:
        node = pending.pop(rng.randrange(len(pending)))
        budget = max_depth - node.depth + 1
        alts = grammar.productions[node.symbol]
        feasible = [k for k, alt in enumerate(alts) if grammar.alt_depth(alt) <= budget]
        node.choice = rng.choice(feasible)
        for s in alts[node.choice]:
            if grammar.is_nonterminal(s):
                child = _Open(s, node.depth + 1)
                node.children.append(child)
                pending.append(child)
            else:
                node.children.append(s)
    return root.freeze()


def sample_tree(grammar: Grammar, seed, max_depth: int = 90) -> Node:
    return grow(grammar, random.Random(seed), START, max_depth)


def sample_sentence(grammar: Grammar, seed, max_depth: int = 90) -> str:
    """One random sentence; deterministic in ``seed``."""
    return sample_tree(grammar, seed, max_depth).text()


# ---------------------------------------------------------------------------
# Recognition
# ---------------------------------------------------------------------------


def parse_tree(grammar: Grammar, text: str, symbol: str = START) -> Node | None:
    """A derivation of ``text`` from ``symbol``, or None if there is none.

    ``text`` must be in single-line canonical form; see :func:`derivation`.
    """
    prods = grammar.productions
    memo: dict[tuple[str, int], list[tuple[int, Node]]] = {}

    def sym(s: str, pos: int) -> list[tuple[int, Node | str]]:
        if s not in prods:
            return [(pos + len(s), s)] if text.startswith(s, pos) else []
        key = (s, pos)
        if key not in memo:
            memo[key] = []  # no left recursion, but guard anyway
            out = []
            for k, alt in enumerate(prods[s]):
                for end, kids in seq(alt, 0, pos):
                    out.append((end, Node(s, k, kids)))
            memo[key] = out
        return memo[key]

    def seq(alt, i: int, pos: int) -> list[tuple[int, tuple]]:
        if i == len(alt):
            return [(pos, ())]
        out = []
        for mid, node in sym(alt[i], pos):
            for end, rest in seq(alt, i + 1, mid):
                out.append((end, (node,) + rest))
        return out

    for end, node in sym(symbol, 0):
        if end == len(text):
            return node
    return None


def derivation(grammar: Grammar, program: Program) -> Node | None:
    """Derivation tree for a parsed program, or None if it is not a sentence."""
    return parse_tree(grammar, render_inline(program))
