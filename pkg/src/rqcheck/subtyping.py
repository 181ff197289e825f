"""Decision procedures for type and qualified-type subtyping.

Universal types use the full (contravariant-bound) rule, which is
undecidable in general, so every unfolding of a type variable or a
universal spends fuel; running out raises FuelExhausted rather than
returning a verdict.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import FuelExhausted
from .qualifiers import qual_sub
from .syntax import (
    All, Base, FRESH, Fun, QualifiedType, Qualifier, RefT, StoreTyping, Top,
    TVar, TermBind, Type, TypeBind, TypeEnv, VarAtom, subst_qual_in_qtype,
    subst_tvar_in_qtype,
)

DEFAULT_FUEL = 512


@dataclass
class _Ctx:
    fuel: int
    counter: int = 0
    notes: Optional[list] = None

    def spend(self):
        if self.fuel <= 0:
            raise FuelExhausted("subtyping fuel exhausted")
        self.fuel -= 1

    def fresh(self, base: str) -> str:
        self.counter += 1
        return f"{base}%{self.counter}"


def _rename_var(qty: QualifiedType, old: str, new: str) -> QualifiedType:
    return subst_qual_in_qtype(qty, VarAtom(old), Qualifier(False, frozenset({VarAtom(new)})))


def _type_sub(env: TypeEnv, store: StoreTyping, s: Type, t: Type, ctx: _Ctx) -> bool:
    if isinstance(s, TVar) and isinstance(t, TVar) and s.name == t.name:
        return True
    if isinstance(t, Top):
        return True
    if isinstance(s, TVar):
        ctx.spend()
        bound = env.lookup_tvar(s.name)
        if bound is None:
            return False
        return _type_sub(env, store, bound.ty, t, ctx)
    if isinstance(s, Base) and isinstance(t, Base):
        return s.name == t.name
    if isinstance(s, RefT) and isinstance(t, RefT):
        # the rule annotates one shared content qualifier on both sides
        if s.content.q != t.content.q:
            return False
        dom_atoms = env.dom() | store.dom()
        if not s.content.q.atoms <= dom_atoms:
            return False
        return (_type_sub(env, store, s.content.ty, t.content.ty, ctx)
                and _type_sub(env, store, t.content.ty, s.content.ty, ctx))
    if isinstance(s, Fun) and isinstance(t, Fun):
        if not _qtype_sub(env, store, t.dom, s.dom, ctx):
            return False
        f = ctx.fresh("f")
        x = ctx.fresh("x")
        scod = _rename_var(_rename_var(s.cod, s.self_name, f), s.param, x)
        tcod = _rename_var(_rename_var(t.cod, t.self_name, f), t.param, x)
        inner = (env
                 .extended(TermBind(f, QualifiedType(s, FRESH)))
                 .extended(TermBind(x, t.dom)))
        return _qtype_sub(inner, store, scod, tcod, ctx)
    if isinstance(s, All) and isinstance(t, All):
        ctx.spend()
        if not _qtype_sub(env, store, t.bound, s.bound, ctx):
            return False
        f = ctx.fresh("f")
        tv = ctx.fresh("X")
        qv = ctx.fresh("x")
        payload = QualifiedType(TVar(tv), Qualifier(False, frozenset({VarAtom(qv)})))
        sbody = _rename_var(subst_tvar_in_qtype(s.body, s.tvar, s.qvar, payload),
                            s.self_name, f)
        tbody = _rename_var(subst_tvar_in_qtype(t.body, t.tvar, t.qvar, payload),
                            t.self_name, f)
        inner = (env
                 .extended(TermBind(f, QualifiedType(s, FRESH)))
                 .extended(TypeBind(tv, qv, t.bound)))
        return _qtype_sub(inner, store, sbody, tbody, ctx)
    return False


def _qtype_sub(env: TypeEnv, store: StoreTyping, p: QualifiedType,
               q: QualifiedType, ctx: _Ctx) -> bool:
    # qualifier obligation first, for qualifier-level diagnostics
    if not qual_sub(env, store, p.q, q.q, ctx.notes):
        return False
    return _type_sub(env, store, p.ty, q.ty, ctx)


def type_sub(env: TypeEnv, store: StoreTyping, s: Type, t: Type,
             fuel: int = DEFAULT_FUEL) -> bool:
    return _type_sub(env, store, s, t, _Ctx(fuel))


def qtype_sub(env: TypeEnv, store: StoreTyping, p: QualifiedType,
              q: QualifiedType, fuel: int = DEFAULT_FUEL,
              notes: Optional[list] = None) -> bool:
    return _qtype_sub(env, store, p, q, _Ctx(fuel, notes=notes))
