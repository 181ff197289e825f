"""Unit tests for the term typechecker."""

import pytest

from rqcheck.cli import check_source
from rqcheck.surface import parse_term, pretty
from rqcheck.syntax import StoreTyping, TermBind, TypeEnv, qt, qual, INT
from rqcheck.typecheck import CheckError, check_program, synthesize

from helpers import corpus_entries
from rqcheck.cli import corpus_text
from rqcheck.surface import parse

EMPTY_ENV = TypeEnv()
EMPTY_STORE = StoreTyping()


def check_term(text: str) -> str:
    term = parse_term(text)
    return pretty(check_program(EMPTY_ENV, EMPTY_STORE, term).qtype)


def rejects(text: str, code: str, source: bool = False):
    with pytest.raises(CheckError) as exc:
        if source:
            check_source(text)
        else:
            check_term(text)
    assert exc.value.code == code, exc.value


# ---------------------------------------------------------------------------
# Accepted shapes


def test_identity_on_a_constant_is_untracked():
    assert check_term("(fn id(x: Int^{*}) : Int^{x} { x })(42)") == "Int^{}"


def test_identity_on_an_allocation_is_fresh():
    assert check_term(
        "(fn id(x: Ref[Int]^{*}) : Ref[Int]^{x} { x })(ref 0)") == "Ref[Int]^{*}"


def test_dependent_codomain_retains_argument_precision():
    text = """
    assume c1: Ref[Int]^{*};
    val c2 = c1;
    val foo = fn foo(x: Ref[Int]^{c1,*}) : Ref[Int]^{x} { x };
    foo(c2)
    """
    assert pretty(check_source(text).qtype) == "Ref[Int]^{c2}"


def test_closure_return_keeps_deep_dependency():
    text = """
    assume c: Ref[Int]^{};
    val f = fn f(x: Ref[Int]^{c}) { fn g^{x}(u: Unit^{}) { x } };
    f(c)
    """
    assert pretty(check_source(text).qtype) == "(Unit => Ref[Int]^{c})^{c}"


def test_escaping_closure_abstracts_its_fresh_capture():
    got = check_term(
        "val c = ref 0; fn f(u: Unit^{}) : Ref[Int]^{f} { c }")
    assert got == "(f(u: Unit^{}) => Ref[Int]^{f})^{*}"


def test_assignment_subsumes_on_the_assigned_value():
    # the rhs variable's qualifier {m} sits below the cell content's
    # qualifier through the maybe-tracked equivalence
    got = check_term("val c = ref 0; fn f(m: Int^{}) { c := m }")
    assert got == "(Int => Unit)^{*}"


def test_untracked_application_path():
    assert check_term("(fn f(x: Int^{}) { x })(1)") == "Int^{}"


# ---------------------------------------------------------------------------
# Rejections, one per error code


def test_unbound_variable():
    from rqcheck.syntax import Var
    with pytest.raises(CheckError) as exc:
        check_program(EMPTY_ENV, EMPTY_STORE, Var("ghost"))
    assert exc.value.code == "UnboundVar"


def test_unobservable_variable():
    env = EMPTY_ENV.extended(TermBind("x", qt(INT)))
    from rqcheck.syntax import Var
    with pytest.raises(CheckError) as exc:
        synthesize(env, EMPTY_STORE, frozenset(), Var("x"))
    assert exc.value.code == "Unobservable"


def test_fresh_capture_annotation_is_rejected():
    rejects("fn f^{*}(u: Unit^{}) { u }", "FreshnessViolation")


def test_capture_annotation_must_cover_used_variables():
    rejects("val c = ref 0; fn f^{}(u: Unit^{}) { !c }", "Unobservable")


def test_fake_identity_cannot_claim_its_argument():
    rejects("fn f(x: Ref[Int]^{*}) : Ref[Int]^{x} { ref 0 }",
            "QualifierMismatch")


def test_overlapping_argument_is_rejected():
    text = """
    assume c1: Ref[Int]^{*};
    val c2 = c1;
    val f = fn f(x: Ref[Int]^{*}) { val d = !c1; !x };
    f(c2)
    """
    rejects(text, "OverlapViolation", source=True)


def test_ascription_type_mismatch():
    rejects("(42 : Unit^{})", "TypeMismatch")


def test_reference_content_may_not_be_fresh():
    rejects("ref (ref 0)", "RefContentFresh")


def test_fresh_argument_may_not_leak_into_the_result_type():
    rejects("(fn f(x: Ref[Int]^{*}) { fn g^{x}(u: Unit^{}) : Unit^{x} { u } })"
            "(ref 0)", "DependencyViolation")


# ---------------------------------------------------------------------------
# Invariants on the corpus


def _accepted_programs():
    for entry in corpus_entries("check"):
        if entry.expect.get("status") == "accepted":
            yield entry, parse(corpus_text(entry))


def test_observability_invariant_on_corpus():
    for entry, prog in _accepted_programs():
        env = TypeEnv()
        for decl in prog.decls:
            if decl[0] == "assume":
                env = env.extended(TermBind(decl[1], decl[2]))
            else:
                result = synthesize(env, EMPTY_STORE, env.dom(), decl[2])
                env = env.extended(TermBind(decl[1], result.qtype))
        qty = synthesize(env, EMPTY_STORE, env.dom(), prog.main).qtype
        assert qty.q.atoms <= env.dom(), entry.name


def test_synthesis_is_deterministic():
    for entry, prog in _accepted_programs():
        first = check_source(corpus_text(entry))
        second = check_source(corpus_text(entry))
        assert pretty(first.qtype) == pretty(second.qtype)
        assert first.trace == second.trace
