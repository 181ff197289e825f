"""Unit tests for the small-step machine and its metatheory harnesses."""

from rqcheck.machine import (
    Store, Stepped, Value, check_preservation, erase_ascriptions, eval_term,
    separation_experiment, step, store_wf,
)
from rqcheck.surface import parse_term, pretty
from rqcheck.syntax import (
    Assign, Const, Deref, INT, LocAtom, LocTerm, RefAlloc, StoreTyping,
    UnitLit, alpha_eq, qt, qual,
)

EMPTY_SIGMA = StoreTyping()


# ---------------------------------------------------------------------------
# Individual reduction rules


def test_beta_ignores_unused_self_name():
    out = step(parse_term("(fn f(x: Int^{}) { x })(5)"), Store.empty())
    assert isinstance(out, Stepped)
    assert out.term == Const(5)
    assert out.event.rule == "beta"


def test_allocation_appends_a_location():
    out = step(RefAlloc(Const(0)), Store.empty())
    assert out.term == LocTerm(0)
    assert out.store.get(0) == Const(0)
    assert (out.event.rule, out.event.loc) == ("ref", 0)


def test_dereference_reads_the_store():
    store = Store({0: Const(7)}, 1)
    out = step(Deref(LocTerm(0)), store)
    assert out.term == Const(7)
    assert out.store.cells == store.cells


def test_assignment_updates_in_place():
    store = Store({0: Const(7)}, 1)
    out = step(Assign(LocTerm(0), Const(9)), store)
    assert out.term == UnitLit()
    assert out.store.get(0) == Const(9)
    assert len(out.store) == 1


def test_type_application_substitutes_the_argument():
    t = parse_term("(tfn f[X^x <: Top^{*}] { fn g(y: X^{x}) { y } })[Int^{}]")
    out = step(t, Store.empty())
    assert out.event.rule == "beta_t"
    assert alpha_eq(out.term, parse_term("fn g(y: Int^{}) { y }"))


def test_ascription_drops_off_a_value():
    t = parse_term("(42 : Int^{})")
    out = step(t, Store.empty())
    assert out.term == Const(42)
    assert out.event.rule == "ascribe"


def test_value_is_terminal():
    assert isinstance(step(Const(1), Store.empty()), Value)


def test_evaluation_order_is_function_then_argument():
    t = parse_term("(fn f(x: Ref[Int]^{*}) { x })((fn g(y: Int^{}) "
                   "{ ref y })(0))")
    events = eval_term(t).events
    assert [e.rule for e in events] == ["beta", "ref", "beta"]


# ---------------------------------------------------------------------------
# eval_term


def test_eval_of_a_value_takes_no_steps():
    result = eval_term(Const(42))
    assert result.status == "value" and result.steps == 0


def test_divergence_exhausts_fuel():
    t = parse_term("val loop = fn loop(x: Unit^{}) : Unit^{} { loop(x) }; "
                   "loop(unit)")
    assert eval_term(t, fuel=100).status == "fuel"


def test_eval_is_deterministic():
    t = parse_term("val c = ref 0; val u = c := 1; !c")
    r1, r2 = eval_term(t), eval_term(t)
    assert r1.term == r2.term and r1.steps == r2.steps
    assert [e.rule for e in r1.events] == [e.rule for e in r2.events]


def test_store_domain_only_grows():
    t = parse_term("val c = ref 0; val d = ref 1; val u = c := 2; !c")
    store = Store.empty()
    doms = [set()]
    while True:
        out = step(t, store)
        if not isinstance(out, Stepped):
            break
        t, store = out.term, out.store
        assert doms[-1] <= set(store.cells)
        doms.append(set(store.cells))


# ---------------------------------------------------------------------------
# Store typing well-formedness


def test_store_wf_accepts_closed_saturated_entries():
    assert store_wf(EMPTY_SIGMA)
    assert store_wf(EMPTY_SIGMA.extended(0, qt(INT)))


def test_store_wf_rejects_free_variables():
    assert not store_wf(EMPTY_SIGMA.extended(0, qt(INT, qual("x"))))


def test_store_wf_rejects_unsaturated_entries():
    sigma = (EMPTY_SIGMA.extended(0, qt(INT, qual(locs=[1])))
             .extended(1, qt(INT, qual(locs=[0]))))
    # @0's entry chases to @1 and back: the fixpoint is {@0, @1}, not {@1}
    assert not store_wf(sigma)


# ---------------------------------------------------------------------------
# Ascription erasure (skeleton comparison only)


def test_erasure_removes_every_ascription():
    t = parse_term("((1 : Int^{}) : Int^{})")
    assert erase_ascriptions(t) == Const(1)


# ---------------------------------------------------------------------------
# Preservation harness


def test_preservation_of_an_allocation_records_the_witness():
    report = check_preservation(RefAlloc(Const(0)), EMPTY_SIGMA)
    assert report.ok and report.status == "value"
    assert len(report.steps) == 1
    assert report.steps[0].witness == frozenset({LocAtom(0)})


def test_preservation_of_a_value_is_an_empty_report():
    report = check_preservation(Const(1), EMPTY_SIGMA)
    assert report.ok and report.steps == []


def test_preservation_of_a_pure_beta_step_has_empty_witness():
    report = check_preservation(parse_term("(fn f(x: Int^{}) { x })(3)"),
                                EMPTY_SIGMA)
    assert report.ok
    assert [s.witness for s in report.steps] == [frozenset()]


# ---------------------------------------------------------------------------
# Separation harness


def test_two_independent_allocators_stay_separate():
    report = separation_experiment(RefAlloc(Const(0)), RefAlloc(Const(1)),
                                   EMPTY_SIGMA)
    assert report.premise_ok and report.ok
    assert report.final_locs == (frozenset({0}), frozenset({1}))


def test_two_constants_are_trivially_separate():
    report = separation_experiment(Const(42), Const(42), EMPTY_SIGMA)
    assert report.premise_ok and report.ok


def test_shared_tracked_location_fails_the_premise():
    sigma = EMPTY_SIGMA.extended(0, qt(INT))
    store = Store({0: Const(7)}, 1)
    report = separation_experiment(LocTerm(0), LocTerm(0), sigma,
                                   store0=store)
    assert not report.premise_ok


def test_dereferencing_untracked_content_is_separate():
    sigma = EMPTY_SIGMA.extended(0, qt(INT))
    store = Store({0: Const(7)}, 1)
    report = separation_experiment(Deref(LocTerm(0)), Deref(LocTerm(0)),
                                   sigma, store0=store)
    assert report.premise_ok and report.ok
