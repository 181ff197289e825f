"""Shared exception types."""


class RqError(Exception):
    pass


class ScopeError(RqError):
    """An atom or name is not bound in the environment or store typing."""


class FuelExhausted(RqError):
    """A fuel-bounded procedure ran out of fuel; distinct from a negative
    answer so incompleteness is never confused with ill-typedness."""
