"""Static analysis of operator programs: dataflow ratios, introns, pruning."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import EmptyCore
from .lang import AtomFlow, Path, Program, dataflow
from .tcg import Model


@dataclass(frozen=True)
class StaticReport:
    r_used_outputs: float
    r_provided_inputs: float
    r_unique_args: float
    r_effective: float
    introns: frozenset[Path]
    phi_code: float
    n_atoms: int
    reasons: dict[Path, str] = field(default_factory=dict, compare=False)

    @property
    def ratios(self) -> tuple[float, float, float, float]:
        return (self.r_used_outputs, self.r_provided_inputs, self.r_unique_args, self.r_effective)


def phi_code(report: StaticReport) -> float:
    """Mean of the four static ratios."""
    return sum(report.ratios) / 4.0


def _ratio(num: int, den: int) -> float:
    return 1.0 if den == 0 else num / den


def _effective(flows: list[AtomFlow]) -> set[Path]:
    by_path = {f.path: f for f in flows}

    def enclosing(path: Path) -> Path | None:
        return path[:-1] or None

    executable: set[Path] = set()
    for f in flows:  # pre-order: parents precede their bodies
        parent = enclosing(f.path)
        if not f.unbound_required and (parent is None or parent in executable):
            executable.add(f.path)

    roots = {p for p in executable if by_path[p].atom.category == "modifier"}
    live_combinators = {
        p
        for p in executable
        if by_path[p].atom.category == "combinator"
        and any(r[: len(p)] == p and r != p for r in roots)
    }
    effective = set(roots) | live_combinators
    for p in executable:
        f = by_path[p]
        is_test = f.atom.category == "filter" or (f.atom.category == "selector" and not f.outputs)
        if not is_test:
            continue
        parent = enclosing(p)
        if (parent is None and roots) or parent in live_combinators:
            effective.add(p)

    work = list(effective)
    while work:
        f = by_path[work.pop()]
        for _, src in f.sources:
            if src not in effective:
                effective.add(src)
                work.append(src)
    return effective


def analyze(model: Model, program: Program) -> StaticReport:
    """Compute the four static ratios and the intron set over all atoms."""
    flows = dataflow(program)
    n = len(flows)

    producers = [f for f in flows if f.outputs]
    consumed = {src for f in flows for _, src in f.sources}
    r_o = _ratio(sum(1 for f in producers if f.path in consumed), len(producers))

    needing = [f for f in flows if f.required]
    r_i = _ratio(sum(1 for f in needing if not f.unbound_required), len(needing))

    def distinct(f: AtomFlow) -> bool:
        names = [r.text for r in f.atom.head_refs()]
        return len(names) == len(set(names))

    r_u = _ratio(sum(1 for f in flows if distinct(f)), n)

    eff = _effective(flows)
    r_e = _ratio(len(eff), n)

    reasons: dict[Path, str] = {}
    for f in flows:
        if f.path in eff:
            continue
        if f.unbound_required:
            reasons[f.path] = "unbound input " + ", ".join(f.unbound_required)
        elif f.outputs and f.path not in consumed:
            reasons[f.path] = "outputs never used"
        else:
            reasons[f.path] = "no path to a modifier"
    introns = frozenset(f.path for f in flows if f.path not in eff)
    score = (r_o + r_i + r_u + r_e) / 4.0
    return StaticReport(r_o, r_i, r_u, r_e, introns, score, n, reasons)


def prune_introns(program: Program, report: StaticReport) -> Program:
    """Drop intron atoms; raises :class:`EmptyCore` if nothing is left."""

    def keep(prog: Program, prefix: Path) -> Program | None:
        atoms = []
        for i, atom in enumerate(prog.atoms):
            path = prefix + (i,)
            if path in report.introns:
                continue
            if atom.body is not None:
                body = keep(atom.body, path)
                if body is None:
                    continue
                atom = replace(atom, body=body)
            atoms.append(atom)
        return Program(tuple(atoms)) if atoms else None

    pruned = keep(program, ())
    if pruned is None:
        raise EmptyCore("every atom is an intron")
    return pruned
