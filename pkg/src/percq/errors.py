"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where an operation is defined."""


class ResourceBudgetError(RuntimeError):
    """Exact computation would exceed the configured work budget."""


class DistillationNotReached(RuntimeError):
    """Iterated distillation did not pass the target fidelity in time.

    The last fidelity reached and the number of steps taken are kept on the
    exception so callers can report how far the iteration got.
    """

    def __init__(self, last_fidelity: float, iterations: int, target: float):
        self.last_fidelity = last_fidelity
        self.iterations = iterations
        self.target = target
        super().__init__(
            f"fidelity {last_fidelity!r} after {iterations} iterations "
            f"did not exceed target {target!r}"
        )
