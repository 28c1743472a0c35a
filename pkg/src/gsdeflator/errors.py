"""Exception hierarchy shared by all modules.

Each class carries the CLI exit code it maps to.
"""


class GsdError(Exception):
    exit_code = 1


class StructuralError(GsdError):
    """Malformed input: shapes, partitions, grids, labels."""

    exit_code = 3


class DomainError(GsdError):
    """A value lies outside an operation's domain (zeros, infinities, negatives)."""

    exit_code = 3


class MeasurabilityError(StructuralError):
    pass


class InstanceTooLarge(GsdError):
    exit_code = 4

    def __init__(self, count, cap):
        super().__init__(f"instance too large: {count} pure strategies exceed cap {cap}")
        self.count = count
        self.cap = cap


class NumeraireNonexistent(GsdError):
    exit_code = 2

    def __init__(self, atoms):
        super().__init__(
            "numéraire nonexistent: C ∩ L⁰₊₊ = ∅ (no generator is positive on atoms "
            f"{list(atoms)})"
        )
        self.atoms = tuple(atoms)


class NonconvergenceError(GsdError):
    exit_code = 2

    def __init__(self, iterations, worst_violation):
        super().__init__(
            f"no certificate after {iterations} iterations; worst violation {worst_violation:.3e}"
        )
        self.iterations = iterations
        self.worst_violation = worst_violation


class HypothesisViolation(GsdError):
    """Raised when a lemma's hypothesis fails and no report object is appropriate."""

    exit_code = 2
