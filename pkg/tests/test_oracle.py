"""Comparison of the algorithmic qualifier-subtyping procedure against
the frozen brute-force declarative oracle on exhaustive small
environments."""

from oracle import all_qualifiers, derivable_pairs
from rqcheck.syntax import StoreTyping, TermBind, TypeEnv, qt, qual, INT

from helpers import oracle_sweep

EMPTY_STORE = StoreTyping()


def test_oracle_derives_maybe_tracked_equivalence():
    env = TypeEnv((TermBind("x", qt(INT)),))
    derivable = derivable_pairs(env, EMPTY_STORE)
    assert (qual("x"), qual()) in derivable
    assert (qual(), qual("x")) in derivable


def test_oracle_never_removes_the_marker():
    env = TypeEnv((TermBind("x", qt(INT)),))
    derivable = derivable_pairs(env, EMPTY_STORE)
    assert (qual(fresh=True), qual("x")) not in derivable


def test_oracle_universe_is_complete():
    env = TypeEnv((TermBind("x", qt(INT)), TermBind("y", qt(INT, qual("x")))))
    assert len(all_qualifiers(env, EMPTY_STORE)) == 2 ** 2 * 2


def test_algorithm_is_sound_for_the_oracle():
    """Exhaustive sweep over every telescope with up to four entries:
    the algorithm must never accept a pair the oracle rejects.
    Completeness gaps are reported, not failed."""
    n_envs, n_pairs, unsound, gaps = oracle_sweep(4)
    print(f"\noracle sweep: {n_envs} environments, {n_pairs} pairs, "
          f"{unsound} unsound acceptances, {gaps} completeness gaps")
    assert n_envs > 16000
    assert unsound == 0
