from __future__ import annotations

import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ndlgen.errors import DepthInfeasible, NoModifiableVariables
from ndlgen.grammar import (
    START,
    GrammarOptions,
    derivation,
    generate_grammar,
    grow,
    parse_bnf,
    parse_tree,
    sample_sentence,
    sample_tree,
)
from ndlgen.lang import parse_operator, render_inline, type_check
from ndlgen.tcg import ConstantSetDecl, ConstraintTypeDecl, VariableTypeDecl, build_model
from ndlgen.tsp import tsp_model

REF = re.compile(r"^(L?)([TDI])\d+$")


@pytest.fixture(scope="module")
def grammar6(model6):
    return generate_grammar(model6)


def mixed_model():
    x = VariableTypeDecl("x", (1, 2, 3), (0, 1))
    y = VariableTypeDecl("y", (1, 2, 3), (1, 2, 3))
    return build_model(
        [x, y],
        [
            ConstraintTypeDecl("cx", "neq_values", tuple((("x", i), ("x", j)) for i in (1, 2, 3) for j in (1, 2, 3) if i != j)),
            ConstraintTypeDecl("cxy", "lt_values", tuple((("x", i), ("y", i)) for i in (1, 2, 3))),
        ],
        [ConstantSetDecl("bits", (0, 1)), ConstantSetDecl("big", (3,))],
    )


def ref_kinds(grammar):
    return {REF.match(t).group(2) for t in grammar.terminals if REF.match(t)}


class TestGeneration:
    def test_two_ref_families_for_tsp(self, grammar6):
        assert ref_kinds(grammar6) == {"T", "D"}

    def test_no_derived_types(self, grammar6):
        bnf = grammar6.to_bnf()
        assert "order" not in bnf
        assert "iterate(" in bnf

    def test_index_family_for_non_self_indexed(self):
        g = generate_grammar(mixed_model())
        assert ref_kinds(g) == {"T", "D", "I"}
        # iterate only over y
        iterate_alts = [alt for alt in g.productions["<combinator>"] if alt[0] == "iterate("]
        assert iterate_alts and all("<T_y>" in alt for alt in iterate_alts)
        assert not any(alt[0] == "iterate(" and "<T_x>" in alt for alts in g.productions.values() for alt in alts)

    def test_constants_respect_domains(self):
        g = generate_grammar(mixed_model())
        alts = g.productions["<selector>"]
        assert ("constant(bits, ", "<D_x>", ")") in alts
        assert ("constant(big, ", "<D_x>", ")") not in alts
        assert ("constant(big, ", "<D_y>", ")") in alts

    def test_no_decision_types(self):
        # derived arrays need a decision source, so only an empty model lacks one
        from ndlgen.tcg import Model

        with pytest.raises(NoModifiableVariables):
            generate_grammar(Model((), ()))

    def test_symmetry_breaking_first_atom(self, grammar6):
        for alt in grammar6.productions["<first>"]:
            refs = [s for s in alt if REF.match(s) and not s.startswith("L")]
            assert all(r in ("T0", "T1", "D0", "D1") for r in refs)

    def test_without_options(self, model6):
        g = generate_grammar(model6, GrammarOptions(local_scopes=False, symmetry_breaking=False, forbid_nested_combinators=False))
        assert not any(t.startswith("L") for t in g.terminals if REF.match(t))
        assert "<body_combinator>" in g.productions

    def test_bnf_round_trip(self, grammar6):
        again = parse_bnf(grammar6.to_bnf())
        assert again.productions == grammar6.productions

    def test_bnf_line_format(self, grammar6):
        for line in grammar6.to_bnf().splitlines():
            assert re.match(r"^<[^>]+> ::= ", line)

    def test_options_validation(self):
        with pytest.raises(ValueError):
            GrammarOptions(n_global_refs=0)


class TestSampling:
    def test_fixtures_are_sentences(self, grammar6, ops):
        for name, p in ops.items():
            tree = derivation(grammar6, p)
            assert tree is not None, name
            assert tree.text() == render_inline(p)

    def test_non_sentence(self, grammar6):
        assert parse_tree(grammar6, "swap(T0, T9)") is None
        assert derivation(grammar6, parse_operator("value(T1, D0)")) is None  # not canonical first atom

    def test_deterministic(self, grammar6):
        assert sample_sentence(grammar6, 42) == sample_sentence(grammar6, 42)

    def test_depth_bounds(self, grammar6):
        with pytest.raises(DepthInfeasible):
            sample_sentence(grammar6, 0, max_depth=1)
        one = parse_operator(sample_sentence(grammar6, 0, max_depth=2))
        assert len(one) == 1

    @settings(max_examples=150, deadline=None)
    @given(st.integers(0, 2**32), st.integers(2, 12))
    def test_depth_respected(self, seed, depth):
        g = generate_grammar(tsp_model(5))
        assert sample_tree(g, seed, depth).depth <= depth

    def test_samples_type_check(self, model6, grammar6):
        for seed in range(300):
            p = parse_operator(sample_sentence(grammar6, seed))
            assert type_check(model6, p).ok

    def test_mixed_model_samples_type_check(self):
        m = mixed_model()
        g = generate_grammar(m)
        for seed in range(300):
            rep = type_check(m, parse_operator(sample_sentence(g, seed)))
            assert rep.ok, rep.errors

    def test_no_nested_combinators(self, grammar6):
        for seed in range(1000):
            p = parse_operator(sample_sentence(grammar6, seed))
            for _, atom in p.walk():
                if atom.body is not None:
                    assert all(a.body is None for _, a in atom.body.walk())

    def test_recognizer_agrees_with_sampler(self, grammar6):
        import random

        for seed in range(50):
            tree = grow(grammar6, random.Random(seed), START, 90)
            assert parse_tree(grammar6, tree.text()) is not None
