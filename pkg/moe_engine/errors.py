"""Exception types shared by the engine, skipping and search packages."""


class InvalidInputError(ValueError):
    """Input data violates a precondition (non-finite logits, empty sequence, ...)."""


class InvalidArgumentError(ValueError):
    """A scalar argument is out of its allowed range (k, k', D, rho, ...)."""


class ContractViolation(RuntimeError):
    """A caller or an algorithm broke an internal contract."""
