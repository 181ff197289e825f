"""Abstract syntax shared by every other module.

Values here are immutable dataclasses. Binder names are required to be
unique within a program (the surface elaborator rejects shadowing), so
substitution never needs to rename: a payload can only mention names
bound outside the term it is pushed into.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Union


# ---------------------------------------------------------------------------
# Qualifiers


@dataclass(frozen=True)
class VarAtom:
    """A term variable or type-qualifier variable occurring in a qualifier."""

    name: str

    def render(self) -> str:
        return self.name


@dataclass(frozen=True)
class LocAtom:
    """A store location occurring in a qualifier."""

    loc: int

    def render(self) -> str:
        return f"@{self.loc}"


Atom = Union[VarAtom, LocAtom]


@dataclass(frozen=True)
class Qualifier:
    """A finite set of atoms plus the freshness marker.

    The marker is stored in `fresh`, never as an atom.
    """

    fresh: bool = False
    atoms: frozenset = frozenset()

    def union(self, other: "Qualifier") -> "Qualifier":
        return Qualifier(self.fresh or other.fresh, self.atoms | other.atoms)

    def with_atoms(self, extra: Iterable[Atom]) -> "Qualifier":
        return Qualifier(self.fresh, self.atoms | frozenset(extra))

    def without(self, atom: Atom) -> "Qualifier":
        return Qualifier(self.fresh, self.atoms - {atom})

    def without_fresh(self) -> "Qualifier":
        return Qualifier(False, self.atoms)

    def is_empty(self) -> bool:
        return not self.fresh and not self.atoms

    def __contains__(self, atom: Atom) -> bool:
        return atom in self.atoms


EMPTY = Qualifier()
FRESH = Qualifier(fresh=True)


def qual(*names: str, fresh: bool = False, locs: Iterable[int] = ()) -> Qualifier:
    """Convenience constructor used heavily by tests and the corpus."""
    atoms = [VarAtom(n) for n in names]
    atoms += [LocAtom(i) for i in locs]
    return Qualifier(fresh, frozenset(atoms))


# ---------------------------------------------------------------------------
# Types


@dataclass(frozen=True)
class Base:
    name: str  # "Int" or "Unit"


@dataclass(frozen=True)
class Top:
    pass


@dataclass(frozen=True)
class TVar:
    name: str


@dataclass(frozen=True)
class RefT:
    content: "QualifiedType"


@dataclass(frozen=True)
class Fun:
    """Dependent function type; cod may mention self_name and param."""

    self_name: str
    param: str
    dom: "QualifiedType"
    cod: "QualifiedType"


@dataclass(frozen=True)
class All:
    """Bounded universal; body may mention self_name, tvar, and qvar."""

    self_name: str
    tvar: str
    qvar: str
    bound: "QualifiedType"
    body: "QualifiedType"


Type = Union[Base, Top, TVar, RefT, Fun, All]

INT = Base("Int")
UNIT = Base("Unit")


@dataclass(frozen=True)
class QualifiedType:
    ty: Type
    q: Qualifier


def qt(ty: Type, q: Qualifier = EMPTY) -> QualifiedType:
    return QualifiedType(ty, q)


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class UnitLit:
    pass


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Abs:
    """Lambda; capture, when given, overrides the default captured
    qualifier (the free variables of the body)."""

    self_name: str
    param: str
    dom: QualifiedType
    cod: Optional[QualifiedType]
    body: "Term"
    capture: Optional[Qualifier] = None


@dataclass(frozen=True)
class App:
    fn: "Term"
    arg: "Term"


@dataclass(frozen=True)
class RefAlloc:
    init: "Term"


@dataclass(frozen=True)
class Deref:
    ref: "Term"


@dataclass(frozen=True)
class Assign:
    lhs: "Term"
    rhs: "Term"


@dataclass(frozen=True)
class LocTerm:
    loc: int


@dataclass(frozen=True)
class TAbs:
    self_name: str
    tvar: str
    qvar: str
    bound: QualifiedType
    body: "Term"
    capture: Optional[Qualifier] = None


@dataclass(frozen=True)
class TApp:
    fn: "Term"
    arg: QualifiedType


@dataclass(frozen=True)
class Ascribe:
    term: "Term"
    qtype: QualifiedType


@dataclass(frozen=True)
class Let:
    name: str
    rhs: "Term"
    body: "Term"


Term = Union[
    Const, UnitLit, Var, Abs, App, RefAlloc, Deref, Assign,
    LocTerm, TAbs, TApp, Ascribe, Let,
]


def is_value(t: Term) -> bool:
    return isinstance(t, (Const, UnitLit, LocTerm, Abs, TAbs))


# ---------------------------------------------------------------------------
# Environments, store typings, observations


@dataclass(frozen=True)
class TermBind:
    name: str
    qtype: QualifiedType


@dataclass(frozen=True)
class TypeBind:
    tvar: str
    qvar: str
    bound: QualifiedType


EnvEntry = Union[TermBind, TypeBind]


@dataclass(frozen=True)
class TypeEnv:
    entries: tuple = ()

    def extended(self, entry: EnvEntry) -> "TypeEnv":
        return TypeEnv(self.entries + (entry,))

    def lookup_term(self, name: str) -> Optional[QualifiedType]:
        for e in reversed(self.entries):
            if isinstance(e, TermBind) and e.name == name:
                return e.qtype
        return None

    def lookup_tvar(self, name: str) -> Optional[QualifiedType]:
        for e in reversed(self.entries):
            if isinstance(e, TypeBind) and e.tvar == name:
                return e.bound
        return None

    def lookup_qvar(self, name: str) -> Optional[QualifiedType]:
        for e in reversed(self.entries):
            if isinstance(e, TypeBind) and e.qvar == name:
                return e.bound
        return None

    def binding_qualifier(self, atom: VarAtom) -> Optional[Qualifier]:
        """Qualifier the atom was assumed at: term binding or bound of X^x."""
        qt_ = self.lookup_term(atom.name)
        if qt_ is not None:
            return qt_.q
        bound = self.lookup_qvar(atom.name)
        if bound is not None:
            return bound.q
        return None

    def dom(self) -> frozenset:
        out = set()
        for e in self.entries:
            if isinstance(e, TermBind):
                out.add(VarAtom(e.name))
            else:
                out.add(VarAtom(e.qvar))
        return frozenset(out)

    def names(self) -> frozenset:
        out = set()
        for e in self.entries:
            if isinstance(e, TermBind):
                out.add(e.name)
            else:
                out.add(e.tvar)
                out.add(e.qvar)
        return frozenset(out)


class StoreTyping:
    """Location typings; treated as immutable, extension copies."""

    def __init__(self, mapping: Optional[dict] = None):
        self.mapping = dict(mapping or {})

    def get(self, loc: int) -> Optional[QualifiedType]:
        return self.mapping.get(loc)

    def extended(self, loc: int, entry: QualifiedType) -> "StoreTyping":
        new = dict(self.mapping)
        new[loc] = entry
        return StoreTyping(new)

    def dom(self) -> frozenset:
        return frozenset(LocAtom(l) for l in self.mapping)

    def __contains__(self, loc: int) -> bool:
        return loc in self.mapping

    def __len__(self) -> int:
        return len(self.mapping)


Observation = frozenset  # of Atom; never contains the freshness marker


# ---------------------------------------------------------------------------
# Free variables


def free_atoms_type(ty: Type, bound: frozenset = frozenset()) -> frozenset:
    """Free atoms of a type: qualifier atoms plus type variables (as VarAtom)."""
    if isinstance(ty, (Base, Top)):
        return frozenset()
    if isinstance(ty, TVar):
        return frozenset() if ty.name in bound else frozenset({VarAtom(ty.name)})
    if isinstance(ty, RefT):
        return free_atoms_qtype(ty.content, bound)
    if isinstance(ty, Fun):
        inner = bound | {ty.self_name, ty.param}
        return free_atoms_qtype(ty.dom, bound) | free_atoms_qtype(ty.cod, inner)
    if isinstance(ty, All):
        inner = bound | {ty.self_name, ty.tvar, ty.qvar}
        return free_atoms_qtype(ty.bound, bound) | free_atoms_qtype(ty.body, inner)
    raise TypeError(f"not a type: {ty!r}")


def _qual_free(q: Qualifier, bound: frozenset) -> frozenset:
    return frozenset(
        a for a in q.atoms
        if isinstance(a, LocAtom) or a.name not in bound
    )


def free_atoms_qtype(qty: QualifiedType, bound: frozenset = frozenset()) -> frozenset:
    return free_atoms_type(qty.ty, bound) | _qual_free(qty.q, bound)


def free_term_atoms(t: Term, bound: frozenset = frozenset(),
                    annotations: bool = False) -> frozenset:
    """Free term-level atoms of a term (variables and locations).

    With annotations=False this is the untyped notion of free variable,
    which is what function capture qualifiers default to.
    """
    if isinstance(t, (Const, UnitLit)):
        return frozenset()
    if isinstance(t, Var):
        return frozenset() if t.name in bound else frozenset({VarAtom(t.name)})
    if isinstance(t, LocTerm):
        return frozenset({LocAtom(t.loc)})
    if isinstance(t, Abs):
        inner = bound | {t.self_name, t.param}
        out = free_term_atoms(t.body, inner, annotations)
        if annotations:
            out |= free_atoms_qtype(t.dom, bound)
            if t.cod is not None:
                out |= free_atoms_qtype(t.cod, inner)
            if t.capture is not None:
                out |= _qual_free(t.capture, bound)
        return out
    if isinstance(t, App):
        return (free_term_atoms(t.fn, bound, annotations)
                | free_term_atoms(t.arg, bound, annotations))
    if isinstance(t, RefAlloc):
        return free_term_atoms(t.init, bound, annotations)
    if isinstance(t, Deref):
        return free_term_atoms(t.ref, bound, annotations)
    if isinstance(t, Assign):
        return (free_term_atoms(t.lhs, bound, annotations)
                | free_term_atoms(t.rhs, bound, annotations))
    if isinstance(t, TAbs):
        inner = bound | {t.self_name, t.tvar, t.qvar}
        out = free_term_atoms(t.body, inner, annotations)
        if annotations:
            out |= free_atoms_qtype(t.bound, bound)
            if t.capture is not None:
                out |= _qual_free(t.capture, bound)
        return out
    if isinstance(t, TApp):
        out = free_term_atoms(t.fn, bound, annotations)
        if annotations:
            out |= free_atoms_qtype(t.arg, bound)
        return out
    if isinstance(t, Ascribe):
        out = free_term_atoms(t.term, bound, annotations)
        if annotations:
            out |= free_atoms_qtype(t.qtype, bound)
        return out
    if isinstance(t, Let):
        return (free_term_atoms(t.rhs, bound, annotations)
                | free_term_atoms(t.body, bound | {t.name}, annotations))
    raise TypeError(f"not a term: {t!r}")


# ---------------------------------------------------------------------------
# Substitution primitives
#
# subst_atom_in_qual is the seed everything else extends homomorphically;
# the qualifier-algebra module re-exports it as q_subst.


def subst_atom_in_qual(q: Qualifier, atom: Atom, payload: Qualifier) -> Qualifier:
    if atom not in q.atoms:
        return q
    return Qualifier(q.fresh or payload.fresh, (q.atoms - {atom}) | payload.atoms)


def subst_qual_in_type(ty: Type, atom: Atom, payload: Qualifier) -> Type:
    if isinstance(ty, (Base, Top, TVar)):
        return ty
    if isinstance(ty, RefT):
        return RefT(subst_qual_in_qtype(ty.content, atom, payload))
    if isinstance(ty, Fun):
        return Fun(ty.self_name, ty.param,
                   subst_qual_in_qtype(ty.dom, atom, payload),
                   subst_qual_in_qtype(ty.cod, atom, payload))
    if isinstance(ty, All):
        return All(ty.self_name, ty.tvar, ty.qvar,
                   subst_qual_in_qtype(ty.bound, atom, payload),
                   subst_qual_in_qtype(ty.body, atom, payload))
    raise TypeError(f"not a type: {ty!r}")


def subst_qual_in_qtype(qty: QualifiedType, atom: Atom,
                        payload: Qualifier) -> QualifiedType:
    return QualifiedType(subst_qual_in_type(qty.ty, atom, payload),
                         subst_atom_in_qual(qty.q, atom, payload))


def subst_tvar_in_type(ty: Type, tvar: str, qvar: str,
                       payload: QualifiedType) -> Type:
    """Replace the type variable by payload.ty and its paired qualifier
    variable by payload.q, in one pass."""
    if isinstance(ty, (Base, Top)):
        return ty
    if isinstance(ty, TVar):
        return payload.ty if ty.name == tvar else ty
    if isinstance(ty, RefT):
        return RefT(subst_tvar_in_qtype(ty.content, tvar, qvar, payload))
    if isinstance(ty, Fun):
        return Fun(ty.self_name, ty.param,
                   subst_tvar_in_qtype(ty.dom, tvar, qvar, payload),
                   subst_tvar_in_qtype(ty.cod, tvar, qvar, payload))
    if isinstance(ty, All):
        return All(ty.self_name, ty.tvar, ty.qvar,
                   subst_tvar_in_qtype(ty.bound, tvar, qvar, payload),
                   subst_tvar_in_qtype(ty.body, tvar, qvar, payload))
    raise TypeError(f"not a type: {ty!r}")


def subst_tvar_in_qtype(qty: QualifiedType, tvar: str, qvar: str,
                        payload: QualifiedType) -> QualifiedType:
    return QualifiedType(subst_tvar_in_type(qty.ty, tvar, qvar, payload),
                         subst_atom_in_qual(qty.q, VarAtom(qvar), payload.q))


def value_qualifier(v: Term) -> Qualifier:
    """Syntactic qualifier of a closed value: its free locations.

    An explicit capture annotation wins when present; the checker has
    already made sure it covers the free variables.
    """
    if isinstance(v, (Abs, TAbs)) and v.capture is not None:
        return Qualifier(False, v.capture.atoms)
    return Qualifier(False, free_term_atoms(v))


def subst_term(t: Term, name: str, v: Term) -> Term:
    """Replace a variable by a closed value.

    Annotation qualifiers mentioning the variable are rewritten with the
    value's syntactic qualifier so reduced terms stay checkable.
    """
    vq = value_qualifier(v)
    atom = VarAtom(name)

    def in_qtype(qty: QualifiedType) -> QualifiedType:
        return subst_qual_in_qtype(qty, atom, vq)

    def go(t: Term) -> Term:
        if isinstance(t, (Const, UnitLit, LocTerm)):
            return t
        if isinstance(t, Var):
            return v if t.name == name else t
        if isinstance(t, Abs):
            if name in (t.self_name, t.param):
                return t
            return Abs(t.self_name, t.param, in_qtype(t.dom),
                       None if t.cod is None else in_qtype(t.cod), go(t.body),
                       None if t.capture is None
                       else subst_atom_in_qual(t.capture, atom, vq))
        if isinstance(t, App):
            return App(go(t.fn), go(t.arg))
        if isinstance(t, RefAlloc):
            return RefAlloc(go(t.init))
        if isinstance(t, Deref):
            return Deref(go(t.ref))
        if isinstance(t, Assign):
            return Assign(go(t.lhs), go(t.rhs))
        if isinstance(t, TAbs):
            if name in (t.self_name, t.qvar):
                return t
            return TAbs(t.self_name, t.tvar, t.qvar, in_qtype(t.bound), go(t.body),
                        None if t.capture is None
                        else subst_atom_in_qual(t.capture, atom, vq))
        if isinstance(t, TApp):
            return TApp(go(t.fn), in_qtype(t.arg))
        if isinstance(t, Ascribe):
            return Ascribe(go(t.term), in_qtype(t.qtype))
        if isinstance(t, Let):
            if name == t.name:
                return Let(t.name, go(t.rhs), t.body)
            return Let(t.name, go(t.rhs), go(t.body))
        raise TypeError(f"not a term: {t!r}")

    return go(t)


def subst_qtype_in_term(t: Term, tvar: str, qvar: str,
                        payload: QualifiedType) -> Term:
    """Type-application substitution pushed through a term body."""

    def in_qtype(qty: QualifiedType) -> QualifiedType:
        return subst_tvar_in_qtype(qty, tvar, qvar, payload)

    def go(t: Term) -> Term:
        if isinstance(t, (Const, UnitLit, LocTerm, Var)):
            return t
        if isinstance(t, Abs):
            return Abs(t.self_name, t.param, in_qtype(t.dom),
                       None if t.cod is None else in_qtype(t.cod), go(t.body),
                       None if t.capture is None
                       else subst_atom_in_qual(t.capture, VarAtom(qvar), payload.q))
        if isinstance(t, App):
            return App(go(t.fn), go(t.arg))
        if isinstance(t, RefAlloc):
            return RefAlloc(go(t.init))
        if isinstance(t, Deref):
            return Deref(go(t.ref))
        if isinstance(t, Assign):
            return Assign(go(t.lhs), go(t.rhs))
        if isinstance(t, TAbs):
            if tvar == t.tvar:
                return t
            return TAbs(t.self_name, t.tvar, t.qvar, in_qtype(t.bound), go(t.body),
                        None if t.capture is None
                        else subst_atom_in_qual(t.capture, VarAtom(qvar), payload.q))
        if isinstance(t, TApp):
            return TApp(go(t.fn), in_qtype(t.arg))
        if isinstance(t, Ascribe):
            return Ascribe(go(t.term), in_qtype(t.qtype))
        if isinstance(t, Let):
            return Let(t.name, go(t.rhs), go(t.body))
        raise TypeError(f"not a term: {t!r}")

    return go(t)


# ---------------------------------------------------------------------------
# Alpha equivalence


def _alpha_qual(q1: Qualifier, q2: Qualifier, ren: dict) -> bool:
    if q1.fresh != q2.fresh or len(q1.atoms) != len(q2.atoms):
        return False
    mapped = set()
    for a in q1.atoms:
        if isinstance(a, VarAtom):
            mapped.add(VarAtom(ren.get(a.name, a.name)))
        else:
            mapped.add(a)
    return mapped == set(q2.atoms)


def _alpha_type(t1: Type, t2: Type, ren: dict) -> bool:
    if type(t1) is not type(t2):
        return False
    if isinstance(t1, Base):
        return t1.name == t2.name
    if isinstance(t1, Top):
        return True
    if isinstance(t1, TVar):
        return ren.get(t1.name, t1.name) == t2.name
    if isinstance(t1, RefT):
        return _alpha_qtype(t1.content, t2.content, ren)
    if isinstance(t1, Fun):
        inner = dict(ren)
        inner[t1.self_name] = t2.self_name
        inner[t1.param] = t2.param
        return (_alpha_qtype(t1.dom, t2.dom, ren)
                and _alpha_qtype(t1.cod, t2.cod, inner))
    if isinstance(t1, All):
        inner = dict(ren)
        inner[t1.self_name] = t2.self_name
        inner[t1.tvar] = t2.tvar
        inner[t1.qvar] = t2.qvar
        return (_alpha_qtype(t1.bound, t2.bound, ren)
                and _alpha_qtype(t1.body, t2.body, inner))
    raise TypeError(f"not a type: {t1!r}")


def _alpha_qtype(q1: QualifiedType, q2: QualifiedType, ren: dict) -> bool:
    return _alpha_type(q1.ty, q2.ty, ren) and _alpha_qual(q1.q, q2.q, ren)


def _alpha_term(t1: Term, t2: Term, ren: dict) -> bool:
    if type(t1) is not type(t2):
        return False
    if isinstance(t1, Const):
        return t1.value == t2.value
    if isinstance(t1, UnitLit):
        return True
    if isinstance(t1, Var):
        return ren.get(t1.name, t1.name) == t2.name
    if isinstance(t1, LocTerm):
        return t1.loc == t2.loc
    if isinstance(t1, Abs):
        inner = dict(ren)
        inner[t1.self_name] = t2.self_name
        inner[t1.param] = t2.param
        if (t1.cod is None) != (t2.cod is None):
            return False
        if t1.cod is not None and not _alpha_qtype(t1.cod, t2.cod, inner):
            return False
        if (t1.capture is None) != (t2.capture is None):
            return False
        if t1.capture is not None and not _alpha_qual(t1.capture, t2.capture, ren):
            return False
        return (_alpha_qtype(t1.dom, t2.dom, ren)
                and _alpha_term(t1.body, t2.body, inner))
    if isinstance(t1, App):
        return _alpha_term(t1.fn, t2.fn, ren) and _alpha_term(t1.arg, t2.arg, ren)
    if isinstance(t1, RefAlloc):
        return _alpha_term(t1.init, t2.init, ren)
    if isinstance(t1, Deref):
        return _alpha_term(t1.ref, t2.ref, ren)
    if isinstance(t1, Assign):
        return (_alpha_term(t1.lhs, t2.lhs, ren)
                and _alpha_term(t1.rhs, t2.rhs, ren))
    if isinstance(t1, TAbs):
        inner = dict(ren)
        inner[t1.self_name] = t2.self_name
        inner[t1.tvar] = t2.tvar
        inner[t1.qvar] = t2.qvar
        if (t1.capture is None) != (t2.capture is None):
            return False
        if t1.capture is not None and not _alpha_qual(t1.capture, t2.capture, ren):
            return False
        return (_alpha_qtype(t1.bound, t2.bound, ren)
                and _alpha_term(t1.body, t2.body, inner))
    if isinstance(t1, TApp):
        return (_alpha_term(t1.fn, t2.fn, ren)
                and _alpha_qtype(t1.arg, t2.arg, ren))
    if isinstance(t1, Ascribe):
        return (_alpha_term(t1.term, t2.term, ren)
                and _alpha_qtype(t1.qtype, t2.qtype, ren))
    if isinstance(t1, Let):
        inner = dict(ren)
        inner[t1.name] = t2.name
        return (_alpha_term(t1.rhs, t2.rhs, ren)
                and _alpha_term(t1.body, t2.body, inner))
    raise TypeError(f"not a term: {t1!r}")


def alpha_eq(a, b) -> bool:
    """Equality modulo consistent renaming of bound names."""
    if isinstance(a, QualifiedType) and isinstance(b, QualifiedType):
        return _alpha_qtype(a, b, {})
    if isinstance(a, Qualifier) and isinstance(b, Qualifier):
        return a == b
    if isinstance(a, (Base, Top, TVar, RefT, Fun, All)):
        return _alpha_type(a, b, {})
    return _alpha_term(a, b, {})


# ---------------------------------------------------------------------------
# Scope checks


def well_scoped_qual(q: Qualifier, env: TypeEnv, store: StoreTyping) -> bool:
    for a in q.atoms:
        if isinstance(a, VarAtom):
            if env.binding_qualifier(a) is None:
                return False
        elif a.loc not in store:
            return False
    return True


def well_scoped_qtype(qty: QualifiedType, env: TypeEnv, store: StoreTyping) -> bool:
    names = env.names()
    locs = {a.loc for a in store.dom()}
    for a in free_atoms_qtype(qty):
        if isinstance(a, VarAtom):
            if a.name not in names:
                return False
        elif a.loc not in locs:
            return False
    return True


def telescope_ok(env: TypeEnv, store: StoreTyping) -> bool:
    """Each entry may only mention earlier entries (and store locations)."""
    seen = TypeEnv()
    taken = set()
    for e in env.entries:
        if isinstance(e, TermBind):
            if e.name in taken or not well_scoped_qtype(e.qtype, seen, store):
                return False
            taken.add(e.name)
        else:
            if e.tvar in taken or e.qvar in taken or e.tvar == e.qvar:
                return False
            if not well_scoped_qtype(e.bound, seen, store):
                return False
            taken.update({e.tvar, e.qvar})
        seen = seen.extended(e)
    return True
