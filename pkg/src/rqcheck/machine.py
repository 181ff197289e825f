"""Call-by-value small-step reduction with a store, plus runtime
validation of the preservation, progress, and separation properties."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .qualifiers import overlap, q_grow, qual_sub, saturate
from .syntax import (
    Abs, App, Ascribe, Assign, Deref, Let, LocAtom, LocTerm, QualifiedType,
    Qualifier, RefAlloc, StoreTyping, TAbs, TApp, Term, TypeEnv, UnitLit,
    alpha_eq, free_term_atoms, is_value, subst_qtype_in_term, subst_term,
    free_atoms_qtype,
)
from .subtyping import type_sub
from .typecheck import check_program

DEFAULT_EVAL_FUEL = 100_000


@dataclass
class Store:
    cells: dict
    next_loc: int = 0

    @staticmethod
    def empty() -> "Store":
        return Store({}, 0)

    def get(self, loc: int) -> Optional[Term]:
        return self.cells.get(loc)

    def alloc(self, v: Term) -> Tuple[int, "Store"]:
        loc = self.next_loc
        cells = dict(self.cells)
        cells[loc] = v
        return loc, Store(cells, loc + 1)

    def updated(self, loc: int, v: Term) -> "Store":
        cells = dict(self.cells)
        cells[loc] = v
        return Store(cells, self.next_loc)

    def __len__(self) -> int:
        return len(self.cells)


@dataclass
class Event:
    rule: str                    # beta, beta_t, ref, deref, assign
    loc: Optional[int] = None


@dataclass
class Stepped:
    term: Term
    store: Store
    event: Event


@dataclass
class Value:
    term: Term


@dataclass
class Stuck:
    reason: str


StepOutcome = object  # Stepped | Value | Stuck


def erase_ascriptions(t: Term) -> Term:
    """Drop every ascription node. The machine reduces ascriptions on
    its own; this is only for tests that compare term skeletons."""
    if isinstance(t, Ascribe):
        return erase_ascriptions(t.term)
    if isinstance(t, Abs):
        return Abs(t.self_name, t.param, t.dom, t.cod, erase_ascriptions(t.body),
                   t.capture)
    if isinstance(t, App):
        return App(erase_ascriptions(t.fn), erase_ascriptions(t.arg))
    if isinstance(t, RefAlloc):
        return RefAlloc(erase_ascriptions(t.init))
    if isinstance(t, Deref):
        return Deref(erase_ascriptions(t.ref))
    if isinstance(t, Assign):
        return Assign(erase_ascriptions(t.lhs), erase_ascriptions(t.rhs))
    if isinstance(t, TAbs):
        return TAbs(t.self_name, t.tvar, t.qvar, t.bound, erase_ascriptions(t.body),
                    t.capture)
    if isinstance(t, TApp):
        return TApp(erase_ascriptions(t.fn), t.arg)
    if isinstance(t, Let):
        return Let(t.name, erase_ascriptions(t.rhs), erase_ascriptions(t.body))
    return t


def step(t: Term, store: Store) -> StepOutcome:
    """One leftmost-innermost reduction step."""
    if is_value(t):
        return Value(t)

    if isinstance(t, App):
        if not is_value(t.fn):
            out = step(t.fn, store)
            if isinstance(out, Stepped):
                return Stepped(App(out.term, t.arg), out.store, out.event)
            return out
        if not is_value(t.arg):
            out = step(t.arg, store)
            if isinstance(out, Stepped):
                return Stepped(App(t.fn, out.term), out.store, out.event)
            return out
        if not isinstance(t.fn, Abs):
            return Stuck("applied a non-function value")
        fn = t.fn
        body = subst_term(fn.body, fn.param, t.arg)
        body = subst_term(body, fn.self_name, fn)
        return Stepped(body, store, Event("beta"))

    if isinstance(t, TApp):
        if not is_value(t.fn):
            out = step(t.fn, store)
            if isinstance(out, Stepped):
                return Stepped(TApp(out.term, t.arg), out.store, out.event)
            return out
        if not isinstance(t.fn, TAbs):
            return Stuck("type-applied a non-type-abstraction value")
        fn = t.fn
        body = subst_qtype_in_term(fn.body, fn.tvar, fn.qvar, t.arg)
        body = subst_term(body, fn.self_name, fn)
        return Stepped(body, store, Event("beta_t"))

    if isinstance(t, RefAlloc):
        if not is_value(t.init):
            out = step(t.init, store)
            if isinstance(out, Stepped):
                return Stepped(RefAlloc(out.term), out.store, out.event)
            return out
        loc, store2 = store.alloc(t.init)
        return Stepped(LocTerm(loc), store2, Event("ref", loc))

    if isinstance(t, Deref):
        if not is_value(t.ref):
            out = step(t.ref, store)
            if isinstance(out, Stepped):
                return Stepped(Deref(out.term), out.store, out.event)
            return out
        if not isinstance(t.ref, LocTerm) or t.ref.loc not in store.cells:
            return Stuck("dereferenced a non-location")
        return Stepped(store.get(t.ref.loc), store, Event("deref", t.ref.loc))

    if isinstance(t, Assign):
        if not is_value(t.lhs):
            out = step(t.lhs, store)
            if isinstance(out, Stepped):
                return Stepped(Assign(out.term, t.rhs), out.store, out.event)
            return out
        if not is_value(t.rhs):
            out = step(t.rhs, store)
            if isinstance(out, Stepped):
                return Stepped(Assign(t.lhs, out.term), out.store, out.event)
            return out
        if not isinstance(t.lhs, LocTerm) or t.lhs.loc not in store.cells:
            return Stuck("assigned to a non-location")
        return Stepped(UnitLit(), store.updated(t.lhs.loc, t.rhs),
                       Event("assign", t.lhs.loc))

    if isinstance(t, Let):
        if not is_value(t.rhs):
            out = step(t.rhs, store)
            if isinstance(out, Stepped):
                return Stepped(Let(t.name, out.term, t.body), out.store, out.event)
            return out
        return Stepped(subst_term(t.body, t.name, t.rhs), store, Event("beta"))

    if isinstance(t, Ascribe):
        # ascriptions evaluate their subject, then vanish; keeping them
        # until that point lets every intermediate term re-typecheck
        if not is_value(t.term):
            out = step(t.term, store)
            if isinstance(out, Stepped):
                return Stepped(Ascribe(out.term, t.qtype), out.store, out.event)
            return out
        return Stepped(t.term, store, Event("ascribe"))

    return Stuck(f"open or ill-formed term: {t!r}")


@dataclass
class EvalResult:
    status: str                  # "value", "stuck", or "fuel"
    term: Optional[Term] = None
    store: Optional[Store] = None
    steps: int = 0
    reason: str = ""
    events: List[Event] = field(default_factory=list)


def eval_term(t: Term, store: Optional[Store] = None,
              fuel: int = DEFAULT_EVAL_FUEL) -> EvalResult:
    store = store if store is not None else Store.empty()
    events: List[Event] = []
    for i in range(fuel):
        out = step(t, store)
        if isinstance(out, Value):
            return EvalResult("value", out.term, store, i, events=events)
        if isinstance(out, Stuck):
            return EvalResult("stuck", t, store, i, out.reason, events)
        t, store = out.term, out.store
        events.append(out.event)
    return EvalResult("fuel", t, store, fuel, "fuel exhausted", events)


def store_wf(sigma: StoreTyping) -> bool:
    """Entries are closed, mention only stored locations, and are
    saturation fixpoints."""
    env = TypeEnv()
    dom = sigma.dom()
    for entry in sigma.mapping.values():
        if not free_atoms_qtype(entry) <= dom:
            return False
        if saturate(env, sigma, entry.q) != entry.q:
            return False
    return True


def _extend_store_typing(sigma: StoreTyping, store: Store, loc: int) -> StoreTyping:
    """Type a newly allocated cell from its value, saturated for ⊢ Σ."""
    v = store.get(loc)
    result = check_program(TypeEnv(), sigma, v)
    entry = QualifiedType(result.qtype.ty,
                          saturate(TypeEnv(), sigma, result.qtype.q))
    return sigma.extended(loc, entry)


@dataclass
class StepReport:
    index: int
    rule: str
    witness: frozenset        # newly allocated locations
    q_before: Qualifier
    q_after: Qualifier
    ok: bool
    detail: str = ""


@dataclass
class PreservationReport:
    ok: bool
    status: str               # final evaluation status
    steps: List[StepReport] = field(default_factory=list)
    final_term: Optional[Term] = None


def check_preservation(t: Term, sigma0: StoreTyping, store0: Optional[Store] = None,
                       fuel: int = DEFAULT_EVAL_FUEL) -> PreservationReport:
    """Re-typecheck after every step and verify qualifier growth.

    After a step the new qualifier must be derivably below the previous
    one grown with the newly allocated locations (growth only applies at
    the freshness marker), and the new type part below the previous one.
    """
    store = store0 if store0 is not None else Store.empty()
    sigma = sigma0
    result = check_program(TypeEnv(), sigma, t)
    qty = result.qtype
    report = PreservationReport(True, "value")
    for i in range(fuel):
        out = step(t, store)
        if isinstance(out, Value):
            report.final_term = out.term
            return report
        if isinstance(out, Stuck):
            report.ok = False
            report.status = f"stuck: {out.reason}"
            return report
        t, store = out.term, out.store
        new_locs = frozenset()
        if out.event.rule == "ref":
            sigma = _extend_store_typing(sigma, store, out.event.loc)
            new_locs = frozenset({LocAtom(out.event.loc)})
        result2 = check_program(TypeEnv(), sigma, t)
        q_after = result2.qtype.q
        witness = Qualifier(False, new_locs)
        expected = q_grow(qty.q, witness)
        ok = qual_sub(TypeEnv(), sigma, q_after, expected)
        detail = "" if ok else "qualifier not below the grown previous one"
        if ok and not (alpha_eq(result2.qtype.ty, qty.ty)
                       or type_sub(TypeEnv(), sigma, result2.qtype.ty, qty.ty)):
            ok = False
            detail = "type part not below the previous one"
        report.steps.append(StepReport(i, out.event.rule, new_locs,
                                       qty.q, q_after, ok, detail))
        if not ok:
            report.ok = False
        qty = result2.qtype
    report.status = "fuel"
    return report


@dataclass
class SeparationReport:
    ok: bool
    premise_ok: bool
    steps: List[str] = field(default_factory=list)
    detail: str = ""
    final_locs: Tuple[frozenset, frozenset] = (frozenset(), frozenset())


def _reachable_locs(t: Term, store: Store) -> frozenset:
    locs = {a.loc for a in free_term_atoms(t, annotations=True)
            if isinstance(a, LocAtom)}
    work = list(locs)
    while work:
        l = work.pop()
        v = store.get(l)
        if v is None:
            continue
        for a in free_term_atoms(v, annotations=True):
            if isinstance(a, LocAtom) and a.loc not in locs:
                locs.add(a.loc)
                work.append(a.loc)
    return frozenset(locs)


def separation_experiment(t1: Term, t2: Term, sigma0: StoreTyping,
                          store0: Optional[Store] = None,
                          fuel: int = DEFAULT_EVAL_FUEL) -> SeparationReport:
    """Interleave two reductions in a shared store and check that their
    qualifiers stay disjoint (overlap within the freshness marker)."""
    store = store0 if store0 is not None else Store.empty()
    sigma = sigma0
    q1 = check_program(TypeEnv(), sigma, t1).qtype.q
    q2 = check_program(TypeEnv(), sigma, t2).qtype.q
    ov = overlap(TypeEnv(), sigma, q1, q2)
    if ov.atoms:
        return SeparationReport(False, False,
                                detail=f"premise failed: overlap has {len(ov.atoms)} atoms")
    report = SeparationReport(True, True)
    terms = [t1, t2]
    quals = [q1, q2]
    for i in range(fuel):
        side = i % 2
        if is_value(terms[0]) and is_value(terms[1]):
            break
        if is_value(terms[side]):
            side = 1 - side
        out = step(terms[side], store)
        if isinstance(out, Stuck):
            report.ok = False
            report.detail = f"side {side + 1} stuck: {out.reason}"
            return report
        terms[side], store = out.term, out.store
        if out.event.rule == "ref":
            sigma = _extend_store_typing(sigma, store, out.event.loc)
        quals[0] = check_program(TypeEnv(), sigma, terms[0]).qtype.q
        quals[1] = check_program(TypeEnv(), sigma, terms[1]).qtype.q
        ov = overlap(TypeEnv(), sigma, quals[0], quals[1])
        report.steps.append(
            f"step {i}: q1 atoms={len(quals[0].atoms)} q2 atoms={len(quals[1].atoms)} "
            f"overlap atoms={len(ov.atoms)}")
        if ov.atoms:
            report.ok = False
            report.detail = f"disjointness violated at step {i}"
            return report
    locs1 = _reachable_locs(terms[0], store)
    locs2 = _reachable_locs(terms[1], store)
    report.final_locs = (locs1, locs2)
    if locs1 & locs2:
        report.ok = False
        report.detail = "final location graphs share nodes"
    return report
