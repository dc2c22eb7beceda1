"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class DegenerateInputError(DomainError):
    """Input is well-formed but the quantity is undefined (e.g. zero variance)."""


class ConvergenceError(RuntimeError):
    """An expectation diverges or a simulation exceeded its slot cap."""


class ValidationError(ValueError):
    """A configuration violates one or more type invariants.

    ``violations`` holds every message found, not just the first.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
