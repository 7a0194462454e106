"""Operator language: AST, surface syntax, rendering and static type checks.

Surface syntax, one atom per comma-separated item::

    constraint(all_diff_next, T0, T1),
    value(T0, D0),
    iterate(T2, LT0-LT1, (
        is_satisfied(all_diff_next, LT1, T1),
        swap(T2, LT1)
    ))

Refs are ``T<n>`` (variable), ``D<n>`` (value), ``I<n>`` (index), with an
``L`` prefix for combinator-local refs.  Filters comparing refs are written
infix: ``T0 = T1``, ``T0 != T1`` (``\\=`` also accepted), ``D0 < D1``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator

from .errors import NDLSyntaxError
from .tcg import Model

SELECTORS = ("constraint", "variable", "value", "constant")
MODIFIERS = ("set", "swap", "flip")
FILTERS = ("is_satisfied", "is_violated", "eq", "neq", "lt")
COMBINATORS = ("for_each", "bfs_over", "bfs_over_inverted", "iterate", "iterate_reversed")
INFIX = {"eq": "=", "neq": "!=", "lt": "<"}

# ref kinds per positional ref argument; "X" = index slot (I, or D for
# self-indexed types)
_REF_SHAPE = {
    "constraint": "TT",
    "variable": "XT",
    "value": "TD",
    "constant": "D",
    "set": "TD",
    "swap": "TT",
    "flip": "TDD",
    "is_satisfied": "TT",
    "is_violated": "TT",
    "bfs_over": "T",
    "bfs_over_inverted": "T",
    "iterate": "T",
    "iterate_reversed": "T",
}
_NAMED = {"constraint", "constant", "is_satisfied", "is_violated", "bfs_over", "bfs_over_inverted"}


def category(op: str) -> str:
    if op in SELECTORS:
        return "selector"
    if op in MODIFIERS:
        return "modifier"
    if op in FILTERS:
        return "filter"
    if op in COMBINATORS:
        return "combinator"
    raise KeyError(op)


@dataclass(frozen=True, order=True)
class Ref:
    kind: str  # "T", "D" or "I"
    ordinal: int
    local: bool = False

    @property
    def text(self) -> str:
        return f"{'L' if self.local else ''}{self.kind}{self.ordinal}"

    def __str__(self) -> str:
        return self.text

    @classmethod
    def parse(cls, text: str) -> "Ref":
        m = re.fullmatch(r"(L?)([TDI])(\d+)", text)
        if not m:
            raise ValueError(f"not a ref: {text!r}")
        return cls(m.group(2), int(m.group(3)), bool(m.group(1)))


@dataclass(frozen=True)
class Atom:
    op: str
    name: str | None = None
    refs: tuple[Ref, ...] = ()
    pair: tuple[Ref, Ref] | None = None
    selector: "Atom | None" = None
    body: "Program | None" = None
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

    @property
    def category(self) -> str:
        return category(self.op)

    def head_refs(self) -> tuple[Ref, ...]:
        """Every ref argument of this atom, excluding its body."""
        out = list(self.refs)
        if self.selector is not None:
            out.extend(self.selector.refs)
        if self.pair is not None:
            out.extend(self.pair)
        return tuple(out)


@dataclass(frozen=True)
class Program:
    atoms: tuple[Atom, ...]

    def __post_init__(self):
        if not self.atoms:
            raise ValueError("a program needs at least one atom")

    def __len__(self) -> int:
        return len(self.atoms)

    def __iter__(self) -> Iterator[Atom]:
        return iter(self.atoms)

    def walk(self, prefix: tuple[int, ...] = ()) -> Iterator[tuple[tuple[int, ...], Atom]]:
        """Pre-order ``(path, atom)`` pairs, combinator bodies included."""
        for i, atom in enumerate(self.atoms):
            path = prefix + (i,)
            yield path, atom
            if atom.body is not None:
                yield from atom.body.walk(path)

    def count_atoms(self) -> int:
        return sum(1 for _ in self.walk())


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<ref>L?[TDI]\d+\b)
  | (?P<name>[a-z_][A-Za-z0-9_]*)
  | (?P<neq>!=|\\=)
  | (?P<punct>[(),\-=<])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise NDLSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        tok = m.group()
        if kind != "ws":
            if kind == "punct":
                kind = tok
            toks.append(_Tok(kind, tok, line, pos - line_start + 1))
        nl = tok.count("\n")
        if nl:
            line += nl
            line_start = m.start() + tok.rindex("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def fail(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise NDLSyntaxError(f"{msg}, found {found}", tok.line, tok.col)

    def expect(self, kind: str, what: str | None = None) -> _Tok:
        tok = self.tok
        if tok.kind != kind:
            self.fail(f"expected {what or repr(kind)}")
        self.i += 1
        return tok

    def program(self, closing: str = "eof") -> Program:
        atoms = [self.atom()]
        while self.tok.kind == ",":
            self.i += 1
            atoms.append(self.atom())
        if self.tok.kind != closing:
            self.fail("expected ',' or " + ("end of input" if closing == "eof" else repr(closing)))
        return Program(tuple(atoms))

    def ref(self) -> Ref:
        return Ref.parse(self.expect("ref", "a ref such as T0 or D1").text)

    def atom(self) -> Atom:
        tok = self.tok
        if tok.kind == "ref":
            left = self.ref()
            op_tok = self.tok
            ops = {"=": "eq", "neq": "neq", "<": "lt"}
            if op_tok.kind not in ops:
                self.fail("expected '=', '!=' or '<' after ref")
            self.i += 1
            right = self.ref()
            return Atom(ops[op_tok.kind], refs=(left, right), line=tok.line, col=tok.col)
        if tok.kind != "name":
            self.fail("expected an atom")
        op = tok.text
        if op in INFIX or op not in _REF_SHAPE and op != "for_each":
            self.fail(f"unknown atom {op!r}")
        self.i += 1
        self.expect("(")
        if op == "for_each":
            sel = self.atom()
            if sel.op not in SELECTORS:
                self.fail("for_each expects a selector as its first argument")
            self.expect(",")
            body = self.body()
            self.expect(")")
            return Atom(op, selector=sel, body=body, line=tok.line, col=tok.col)
        name = None
        if op in _NAMED:
            name = self.expect("name", "a constraint or constant name").text
        refs = []
        for k in range(len(_REF_SHAPE[op])):
            if name is not None or k > 0:
                self.expect(",")
            refs.append(self.ref())
        pair = body = None
        if op in COMBINATORS:
            self.expect(",")
            a = self.ref()
            self.expect("-", "'-' in a ref pair")
            b = self.ref()
            pair = (a, b)
            self.expect(",")
            body = self.body()
        self.expect(")")
        return Atom(op, name=name, refs=tuple(refs), pair=pair, body=body, line=tok.line, col=tok.col)

    def body(self) -> Program:
        self.expect("(", "'(' opening a combinator body")
        prog = self.program(closing=")")
        self.expect(")")
        return prog


def parse_operator(text: str) -> Program:
    """Parse operator source into a :class:`Program`."""
    p = _Parser(text)
    if p.tok.kind == "eof":
        p.fail("empty operator")
    return p.program()


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _head(atom: Atom) -> str:
    if atom.op in INFIX:
        a, b = atom.refs
        return f"{a} {INFIX[atom.op]} {b}"
    if atom.op == "for_each":
        return f"for_each({_head(atom.selector)}"
    args = ([atom.name] if atom.name is not None else []) + [r.text for r in atom.refs]
    if atom.pair is not None:
        args.append(f"{atom.pair[0]}-{atom.pair[1]}")
    if atom.body is not None:
        return f"{atom.op}({', '.join(args)}"
    return f"{atom.op}({', '.join(args)})"


def render_atom_inline(atom: Atom) -> str:
    if atom.body is None:
        return _head(atom)
    return f"{_head(atom)}, ({render_inline(atom.body)}))"


def render_inline(program: Program) -> str:
    """Single-line canonical form."""
    return ", ".join(render_atom_inline(a) for a in program)


def _render_lines(program: Program, indent: int, prefix: str, numbered: bool) -> list[str]:
    lines = []
    n = len(program.atoms)
    for i, atom in enumerate(program.atoms):
        label = f"{prefix}{i + 1}"
        sep = "," if i < n - 1 else ""
        pad = " " * indent
        tag = f"{label:<6}" if numbered else ""
        if atom.body is None:
            lines.append(f"{tag}{pad}{_head(atom)}{sep}")
        else:
            lines.append(f"{tag}{pad}{_head(atom)}, (")
            lines.extend(_render_lines(atom.body, indent + 4, label + ".", numbered))
            lines.append(f"{' ' * 6 if numbered else ''}{pad})){sep}")
    return lines


def render(program: Program, numbered: bool = False) -> str:
    """Canonical multi-line form; ``numbered`` adds 1, 2, 2.1 … labels
    (display only, not re-parseable)."""
    return "\n".join(_render_lines(program, 0, "", numbered))


# ---------------------------------------------------------------------------
# Dataflow walk
# ---------------------------------------------------------------------------

Path = tuple[int, ...]


@dataclass(frozen=True)
class AtomFlow:
    path: Path
    atom: Atom
    depth: int
    bound_before: frozenset[str]
    bound_after: frozenset[str]
    inputs: tuple[str, ...]
    required: tuple[str, ...]
    outputs: tuple[str, ...]
    sources: tuple[tuple[str, Path], ...]  # input ref -> producing atom

    @property
    def unbound_required(self) -> tuple[str, ...]:
        return tuple(r for r in self.required if r not in self.bound_before)


def _classify(atom: Atom, bound: frozenset[str]):
    """Split an atom's head refs into (inputs, required, outputs)."""
    cat = atom.category
    if cat == "selector" or atom.op == "for_each":
        refs = atom.selector.refs if atom.op == "for_each" else atom.refs
        ins = tuple(dict.fromkeys(r.text for r in refs if r.text in bound))
        outs = tuple(dict.fromkeys(r.text for r in refs if r.text not in bound))
        return ins, (), outs
    if cat in ("filter", "modifier"):
        names = tuple(dict.fromkeys(r.text for r in atom.refs))
        return tuple(n for n in names if n in bound), names, ()
    # bfs / iterate: start ref is required, pair refs are body-scoped outputs
    start = atom.refs[0].text
    outs = tuple(dict.fromkeys(r.text for r in atom.pair))
    return ((start,) if start in bound else ()), (start,), outs


def dataflow(program: Program) -> list[AtomFlow]:
    """Left-to-right binding analysis, in pre-order over all atoms.

    Bindings made inside a combinator body never escape it.
    """
    flows: list[AtomFlow] = []

    def visit(prog: Program, prefix: Path, bound: frozenset[str], producer: dict[str, Path], depth: int):
        for i, atom in enumerate(prog.atoms):
            path = prefix + (i,)
            ins, req, outs = _classify(atom, bound)
            srcs = tuple((r, producer[r]) for r in ins if r in producer)
            if atom.body is None:
                after = bound | set(outs)
            else:
                after = bound
            flows.append(AtomFlow(path, atom, depth, bound, after, ins, req, outs, srcs))
            if atom.body is not None:
                inner = dict(producer)
                for r in outs:
                    inner[r] = path
                visit(atom.body, path, bound | set(outs), inner, depth + 1)
            else:
                for r in outs:
                    producer[r] = path
                bound = after

    visit(program, (), frozenset(), {}, 0)
    return flows


# ---------------------------------------------------------------------------
# Type checking
# ---------------------------------------------------------------------------


@dataclass
class TypeReport:
    ok: bool
    errors: list[tuple[Path, str]]
    binding_map: dict[Path, tuple[frozenset[str], frozenset[str]]]
    ref_types: dict[str, str | None]


class _UnionFind:
    def __init__(self):
        self.parent: dict[str, str] = {}
        self.label: dict[str, str] = {}

    def find(self, x: str) -> str:
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: str, b: str) -> tuple[str, str] | None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return None
        la, lb = self.label.get(ra), self.label.get(rb)
        if la is not None and lb is not None and la != lb:
            return la, lb
        self.parent[rb] = ra
        if la is None and lb is not None:
            self.label[ra] = lb
        return None

    def assign(self, a: str, t: str) -> str | None:
        r = self.find(a)
        cur = self.label.get(r)
        if cur is not None and cur != t:
            return cur
        self.label[r] = t
        return None

    def type_of(self, a: str) -> str | None:
        return self.label.get(self.find(a))


def type_check(model: Model, program: Program) -> TypeReport:
    """Static checks: names, argument kinds, ref typing, iterate eligibility
    and local-ref scoping.  Repeated arguments are not an error."""
    errors: list[tuple[Path, str]] = []
    uf = _UnionFind()
    index_slots: list[tuple[Path, Ref, Ref]] = []  # (path, index ref, var ref)
    iter_starts: list[tuple[Path, Ref]] = []
    const_uses: list[tuple[Path, str, Ref]] = []

    def err(path: Path, msg: str):
        errors.append((path, msg))

    def need_kind(path: Path, ref: Ref, kinds: str, what: str):
        if ref.kind not in kinds:
            err(path, f"{what}: expected a {'/'.join(kinds)} ref, got {ref}")
            return False
        return True

    def assign(path: Path, ref: Ref, t: str):
        clash = uf.assign(ref.text, t)
        if clash:
            err(path, f"{ref} used both as {clash} and {t}")

    def unify(path: Path, a: Ref, b: Ref):
        clash = uf.union(a.text, b.text)
        if clash:
            err(path, f"{a} and {b} must share a type but are {clash[0]} and {clash[1]}")

    def constraint_ends(path: Path, name: str) -> tuple[str, str] | None:
        if not model.has_constraint(name):
            err(path, f"UnknownConstraintType: {name}")
            return None
        c = model.constraint(name)
        if name in model.touches_derived:
            err(path, f"constraint {name} involves derived variables, which operators cannot access")
            return None
        return c.endpoint_types

    def check_atom(path: Path, atom: Atom, depth: int):
        # pair refs and for_each selector refs are scoped to the body
        scoped = atom.refs if atom.op != "for_each" else ()
        for r in scoped:
            if r.local and depth == 0:
                err(path, f"local ref {r} outside any combinator body")
        op = atom.op
        if atom.op == "for_each":
            check_atom(path, atom.selector, depth + 1)
            return
        shape = _REF_SHAPE.get(op)
        if shape is not None and len(atom.refs) != len(shape):
            err(path, f"{op} takes {len(shape)} ref arguments")
            return
        if op in ("constraint", "is_satisfied", "is_violated"):
            a, b = atom.refs
            ok = need_kind(path, a, "T", op) & need_kind(path, b, "T", op)
            ends = constraint_ends(path, atom.name)
            if ok and ends:
                assign(path, a, ends[0])
                assign(path, b, ends[1])
        elif op == "variable":
            i, t = atom.refs
            if need_kind(path, i, "ID", op) & need_kind(path, t, "T", op):
                unify(path, i, t)
                index_slots.append((path, i, t))
        elif op in ("value", "set"):
            t, d = atom.refs
            if need_kind(path, t, "T", op) & need_kind(path, d, "D", op):
                unify(path, t, d)
        elif op == "swap":
            a, b = atom.refs
            if need_kind(path, a, "T", op) & need_kind(path, b, "T", op):
                unify(path, a, b)
        elif op == "flip":
            t, d1, d2 = atom.refs
            if need_kind(path, t, "T", op) & need_kind(path, d1, "D", op) & need_kind(path, d2, "D", op):
                unify(path, t, d1)
                unify(path, t, d2)
        elif op == "constant":
            (d,) = atom.refs
            if not model.has_constant(atom.name):
                err(path, f"unknown constant set {atom.name}")
            elif need_kind(path, d, "D", op):
                const_uses.append((path, atom.name, d))
        elif op in ("eq", "neq", "lt"):
            a, b = atom.refs
            if a.kind != b.kind:
                err(path, f"cannot compare {a} with {b}")
            elif op == "lt" and a.kind == "T":
                err(path, "'<' compares values or indexes, not variables")
            else:
                unify(path, a, b)
        elif op in ("bfs_over", "bfs_over_inverted"):
            (start,) = atom.refs
            p, q = atom.pair
            ok = need_kind(path, start, "T", op) & need_kind(path, p, "T", op) & need_kind(path, q, "T", op)
            ends = constraint_ends(path, atom.name)
            if ok and ends:
                assign(path, start, ends[0] if op == "bfs_over" else ends[1])
                assign(path, p, ends[0])
                assign(path, q, ends[1])
        elif op in ("iterate", "iterate_reversed"):
            (start,) = atom.refs
            p, q = atom.pair
            if need_kind(path, start, "T", op) & need_kind(path, p, "T", op) & need_kind(path, q, "T", op):
                unify(path, start, p)
                unify(path, start, q)
                iter_starts.append((path, start))

    for path, atom in program.walk():
        depth = len(path) - 1
        check_atom(path, atom, depth)

    types: dict[str, str | None] = {}
    for path, atom in program.walk():
        for r in atom.head_refs():
            types[r.text] = uf.type_of(r.text)

    reported: set[tuple[Path, str]] = set()
    for path, atom in program.walk():
        for r in atom.head_refs():
            t = types[r.text]
            if t is None:
                continue
            if not model.has_var(t):
                continue
            if model.var(t).derived and (path, r.text) not in reported:
                reported.add((path, r.text))
                err(path, f"{r} refers to derived type {t}, which operators cannot access")
    for path, i, t in index_slots:
        ty = types.get(t.text)
        if i.kind == "D" and ty is not None and not model.var(ty).self_indexed:
            err(path, f"{i} is a value ref but {ty} indexes differ from its domain; use an I ref")
    for path, start in iter_starts:
        ty = types.get(start.text)
        if ty is not None and not model.var(ty).self_indexed:
            err(path, f"iterate requires a type whose domain and index set coincide; {ty} does not")
    for path, cname, d in const_uses:
        ty = types.get(d.text)
        if ty is not None and not set(model.constant(cname).values) <= set(model.var(ty).domain):
            err(path, f"constant set {cname} is not contained in the domain of {ty}")

    binding_map = {f.path: (f.bound_before, f.bound_after) for f in dataflow(program)}
    errors.sort(key=lambda e: e[0])
    return TypeReport(not errors, errors, binding_map, types)
