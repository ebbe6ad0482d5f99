class InputError(ValueError):
    """Malformed or dimensionally inconsistent input."""


class PreconditionError(ValueError):
    """An operation was called outside the region where it is defined."""


class DomainError(ValueError):
    """A point lies outside the domain of a geometric map (e.g. inside a curve)."""


class GenericityError(ValueError):
    """A genericity assumption required for a prediction does not hold."""
