"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class EmptyInputError(ValueError):
    """An operation received an empty sequence or reduction axis."""


class ContractError(RuntimeError):
    """A caller broke an API precondition."""


class CorpusError(ValueError):
    """Corpus content could not be parsed or used."""


class CorpusValidationError(CorpusError):
    """One or more corpus invariants are violated.

    ``violations`` lists every problem as ``"sentence <i>: <field>: <what>"``.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ConfigError(ValueError):
    """Unknown or inconsistent configuration values."""


class CompatibilityError(ValueError):
    """A checkpoint does not match the corpus it is applied to."""


class TrainingDiverged(RuntimeError):
    """Training loss failed to fall during the early epochs."""
